use std::fs;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rawedge_core::codec::load_weights;
use rawedge_core::controller::Controller;
use rawedge_core::eval::{
    evaluate_at, frames_csv, generate_corpus, latency_svg, pareto_svg, parse_frame_boxes, profile_csv,
    profile_offline, resolve_lut, run_experiment, summary_text, write_frame_boxes, Detector, ExperimentConfig,
};
use rawedge_core::netsim::{generate_trace, TraceParams};
use rawedge_core::pipeline::{
    run_client, run_server, ClientConfig, EdgeServer, ExecutionMode, RunSummary, Scenario, TilePolicy, TraceSource,
};
use rawedge_core::rawframe::{read_raw, write_raw, CfaPattern, SyntheticScene};

#[derive(Parser)]
#[command(name = "rawedge", version, about = "Tile-wise RAW offloading toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random-walk bandwidth trace.
    TraceGen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds.
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Bytes per second.
        #[arg(long, default_value_t = 2.5e6)]
        mean_rate: f64,
        /// Seconds between rate changes.
        #[arg(long, default_value_t = 0.1)]
        step_interval: f64,
        /// Bytes per second per step; 10% of the mean when omitted.
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic RAW scenes and their ground truth.
    SceneGen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 768)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long, default_value_t = 3)]
        objects: usize,
        #[arg(long, default_value = "rggb")]
        pattern: CfaPattern,
        /// Directory for `frame_NNNNN.raw` files and `truth.txt`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Profile every codec configuration and write the LUT.
    Profile {
        /// Grid layout, objects and transmission threshold come from here.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Directory written by `scene-gen`; a corpus is generated otherwise.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out_lut: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Accuracy against bytes plot.
        #[arg(long)]
        out_svg: Option<PathBuf>,
    },
    /// Run a scenario on the virtual clock.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        policy: Option<Policy>,
    },
    /// Run a scenario with or without tile selection; both when no mode is given.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        mode: Option<Policy>,
    },
    /// Score detections against ground truth.
    Eval {
        /// `frame class confidence x y w h` lines.
        #[arg(long)]
        detections: PathBuf,
        /// `frame class x y w h` lines.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 0.25)]
        conf: f32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edge server over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Exit after this many client connections.
        #[arg(long)]
        connections: Option<usize>,
    },
    /// Stream a scenario to a running server in real time.
    Offload {
        #[arg(long, default_value = "127.0.0.1:7878")]
        connect: String,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        policy: Option<Policy>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file; built-in defaults otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Trace file overriding the scenario's link.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    luminosity: Option<f64>,
    /// Ignore any weight file named by the scenario.
    #[arg(long)]
    default_weights: bool,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Serialized,
    Pipelined,
}

impl From<Mode> for ExecutionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Serialized => ExecutionMode::Serialized,
            Mode::Pipelined => ExecutionMode::Pipelined,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Default,
    Alltiles,
}

impl From<Policy> for TilePolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Default => TilePolicy::Adaptive,
            Policy::Alltiles => TilePolicy::AllTiles,
        }
    }
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p).with_context(|| format!("loading scenario {}", p.display())),
        None => Ok(Scenario::default()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn experiment(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut scenario = load_scenario(run.scenario.as_deref())?;
    if let Some(t) = &run.trace {
        scenario.trace = TraceSource::File(t.clone());
    }
    if let Some(n) = run.frames {
        scenario.frames = n;
    }
    Ok(ExperimentConfig {
        luminosity: run.luminosity,
        default_weights: run.default_weights,
        output: run.out.clone(),
        ..ExperimentConfig::new(scenario)
    })
}

fn load_corpus(dir: &Path) -> Result<Vec<SyntheticScene>> {
    let mut raws: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "raw"))
        .collect();
    raws.sort();
    if raws.is_empty() {
        bail!("no .raw frames in {}", dir.display());
    }
    let truth_text = fs::read_to_string(dir.join("truth.txt")).context("reading truth.txt")?;
    let truths = parse_frame_boxes(&truth_text, false, raws.len())?;
    if truths.len() != raws.len() {
        bail!("truth.txt lists frames beyond the {} RAW files", raws.len());
    }
    raws.iter()
        .zip(truths)
        .enumerate()
        .map(|(i, (p, truth))| {
            let frame = read_raw(fs::File::open(p)?).with_context(|| format!("reading {}", p.display()))?;
            Ok(SyntheticScene { frame, truth, seed: i as u64 })
        })
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::TraceGen { seed, duration, mean_rate, step_interval, step_size, out } => {
            let params = TraceParams {
                step_interval,
                step_size: step_size.unwrap_or(0.1 * mean_rate),
                ..TraceParams::with_defaults(duration, mean_rate)
            };
            let trace = generate_trace(seed, &params)?;
            write(&out, &trace.to_text())?;
            println!("{} samples over {duration} s -> {}", trace.samples().len(), out.display());
        }
        Command::SceneGen { seed, count, width, height, objects, pattern, out } => {
            fs::create_dir_all(&out)?;
            let corpus = generate_corpus(seed, count, width, height, objects, pattern)?;
            for (i, scene) in corpus.iter().enumerate() {
                write_raw(fs::File::create(out.join(format!("frame_{i:05}.raw")))?, &scene.frame)?;
            }
            let truths: Vec<_> = corpus.into_iter().map(|s| s.truth).collect();
            write(&out.join("truth.txt"), &write_frame_boxes(&truths, false))?;
            println!("{count} scenes -> {}", out.display());
        }
        Command::Profile { scenario, corpus, seed, count, weights, out_lut, out_csv, out_svg } => {
            let mut sc = load_scenario(scenario.as_deref())?;
            let corpus = match corpus {
                Some(dir) => {
                    let scenes = load_corpus(&dir)?;
                    // The grid follows the stored frames.
                    (sc.width, sc.height) = (scenes[0].frame.width(), scenes[0].frame.height());
                    scenes
                }
                None => generate_corpus(seed, count, sc.width, sc.height, sc.objects, sc.pattern)?,
            };
            let weights = match weights {
                Some(p) => load_weights(&p)?,
                None => sc.codec_weights()?,
            };
            let grid = sc.grid()?;
            let profile =
                profile_offline(&corpus, &weights, &Detector::default(), &grid, sc.tx_threshold, sc.sim.strategy)?;
            write(&out_lut, &profile.lut.to_text())?;
            let csv = profile_csv(&profile.rows);
            if let Some(p) = out_csv {
                write(&p, &csv)?;
            }
            if let Some(p) = out_svg {
                write(&p, &pareto_svg(&profile.rows))?;
            }
            print!("{csv}");
        }
        Command::Simulate { run, mode, policy } => {
            let mut cfg = experiment(&run)?;
            if let Some(m) = mode {
                cfg.scenario.sim.mode = m.into();
            }
            cfg.policy = policy.map(Into::into);
            let outcome = run_experiment(&cfg)?;
            print!("{}", summary_text(&outcome.run.summary));
        }
        Command::Ablate { run, mode } => {
            let base = experiment(&run)?;
            let modes = match mode {
                Some(m) => vec![m],
                None => vec![Policy::Default, Policy::Alltiles],
            };
            println!("{:<10} {:>10} {:>12} {:>8} {:>8} {:>10}", "mode", "fps", "bytes/frame", "tiles", "mAP", "e2e_ms");
            for m in modes {
                let name = match m {
                    Policy::Default => "default",
                    Policy::Alltiles => "alltiles",
                };
                let mut cfg = base.clone();
                cfg.policy = Some(m.into());
                cfg.output = base.output.as_ref().map(|d| if mode.is_some() { d.clone() } else { d.join(name) });
                let s = run_experiment(&cfg)?.run.summary;
                println!(
                    "{name:<10} {:>10.2} {:>12.1} {:>8.2} {:>8.4} {:>10.2}",
                    s.throughput,
                    s.mean_frame_bytes,
                    s.mean_tiles,
                    s.map,
                    s.mean_latency * 1e3
                );
            }
        }
        Command::Eval { detections, truth, iou, conf, out } => {
            let mut truths = parse_frame_boxes(&fs::read_to_string(&truth)?, false, 0)?;
            let dets = parse_frame_boxes(&fs::read_to_string(&detections)?, true, truths.len())?;
            truths.resize(dets.len(), Vec::new());
            let r = evaluate_at(&dets, &truths, iou, conf)?;
            let mut text = format!(
                "frames = {}\nmap = {:.6}\nprecision = {:.6}\nrecall = {:.6}\nf1 = {:.6}\n",
                dets.len(),
                r.map,
                r.precision,
                r.recall,
                r.f1
            );
            for c in &r.classes {
                text += &format!("ap_class_{} = {:.6}  # {} truths\n", c.class_id, c.ap, c.truths);
            }
            if let Some(p) = out {
                write(&p, &text)?;
            }
            print!("{text}");
        }
        Command::Serve { bind, weights, connections } => {
            let weights = match weights {
                Some(p) => load_weights(&p)?,
                None => rawedge_core::codec::default_weights(),
            };
            let listener = TcpListener::bind(&bind).with_context(|| format!("binding {bind}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            let server = EdgeServer::new(weights, Detector::default());
            let handled = run_server(&listener, &server, connections)?;
            eprintln!("handled {handled} messages");
        }
        Command::Offload { connect, scenario, frames, mode, policy, out } => {
            let mut sc = load_scenario(scenario.as_deref())?;
            if let Some(n) = frames {
                sc.frames = n;
            }
            let weights = sc.codec_weights()?;
            let (lut, _) = resolve_lut(&sc, &weights)?;
            let controller = Controller::new(lut, sc.grid()?, sc.window)?;
            let cfg = ClientConfig {
                mode: mode.map_or(sc.sim.mode, Into::into),
                policy: policy.map_or(sc.sim.policy, Into::into),
                capture_interval: sc.sim.capture_interval,
                queue_capacity: sc.sim.queue_capacity,
                luminosity: sc.sim.luminosity,
                strategy: sc.sim.strategy,
            };
            let stream = TcpStream::connect(&connect).with_context(|| format!("connecting to {connect}"))?;
            let metrics = run_client(stream, sc.scenes()?.take(sc.frames), controller, weights, &cfg)?;
            let first = metrics.iter().map(|m| m.captured_at).fold(f64::INFINITY, f64::min);
            let summary = RunSummary::from_metrics(&metrics, if first.is_finite() { first } else { 0.0 })?;
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                write(&dir.join("frames.csv"), &frames_csv(&metrics))?;
                write(&dir.join("summary.txt"), &summary_text(&summary))?;
                write(&dir.join("latency.svg"), &latency_svg(&metrics))?;
            }
            print!("{}", summary_text(&summary));
        }
    }
    Ok(())
}
