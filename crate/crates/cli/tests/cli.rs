use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::thread::sleep;
use std::time::Duration;

fn rawedge(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rawedge")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &str = "width = 384\nheight = 256\noverlap = 16\nframes = 20\nprofile_scenes = 3\n";

#[test]
fn generators_and_profiling() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    rawedge(d, &["trace-gen", "--seed", "4", "--duration", "2", "--mean-rate", "1e6", "--out", "trace.txt"]);
    let trace = fs::read_to_string(d.join("trace.txt")).unwrap();
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 20);

    rawedge(d, &["scene-gen", "--count", "3", "--width", "384", "--height", "256", "--out", "scenes"]);
    assert!(d.join("scenes/frame_00002.raw").exists());
    let out = rawedge(d, &["profile", "--corpus", "scenes", "--out-lut", "lut.txt", "--out-csv", "p.csv"]);
    assert!(stdout(&out).starts_with("config_id,"));
    let lut = fs::read_to_string(d.join("lut.txt")).unwrap();
    assert_eq!(lut.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert_eq!(fs::read_to_string(d.join("p.csv")).unwrap().lines().count(), 5);
}

#[test]
fn simulate_and_ablate_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("s.scn"), SMALL).unwrap();
    let out = rawedge(d, &["simulate", "--scenario", "s.scn", "--mode", "serialized", "--out", "run"]);
    assert!(stdout(&out).contains("frames = 20"));
    let csv = fs::read_to_string(d.join("run/frames.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(d.join("run/latency.svg").exists());

    let out = rawedge(d, &["ablate", "--scenario", "s.scn", "--out", "abl"]);
    let text = stdout(&out);
    assert!(text.contains("default") && text.contains("alltiles"), "{text}");
    assert!(d.join("abl/alltiles/summary.txt").exists() && d.join("abl/default/summary.txt").exists());
}

#[test]
fn eval_scores_box_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("dets.txt"), "0 1 0.9 0 0 10 10\n0 1 0.8 50 50 10 10\n").unwrap();
    fs::write(d.join("truth.txt"), "0 1 0 0 10 10\n").unwrap();
    let out = rawedge(d, &["eval", "--detections", "dets.txt", "--truth", "truth.txt", "--out", "r.txt"]);
    let text = stdout(&out);
    assert!(text.contains("map = 1.000000") && text.contains("precision = 0.500000"), "{text}");
    assert_eq!(fs::read_to_string(d.join("r.txt")).unwrap(), text);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rawedge"))
        .current_dir(tmp.path())
        .args(["simulate", "--scenario", "missing.scn"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.scn"));
}

#[test]
fn serve_and_offload_over_loopback() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("s.scn"), SMALL).unwrap();
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let mut server = Command::new(env!("CARGO_BIN_EXE_rawedge"))
        .args(["serve", "--bind", &addr, "--connections", "1"])
        .spawn()
        .unwrap();
    let mut result = None;
    for _ in 0..50 {
        let out = Command::new(env!("CARGO_BIN_EXE_rawedge"))
            .current_dir(d)
            .args(["offload", "--connect", &addr, "--scenario", "s.scn", "--frames", "8", "--out", "wall"])
            .output()
            .unwrap();
        if out.status.success() {
            result = Some(out);
            break;
        }
        sleep(Duration::from_millis(100));
    }
    let out = result.expect("offload never connected");
    assert!(stdout(&out).contains("frames = 8\ndropped = 0"), "{}", stdout(&out));
    assert!(server.wait().unwrap().success());
    assert_eq!(fs::read_to_string(d.join("wall/frames.csv")).unwrap().lines().count(), 9);
}
