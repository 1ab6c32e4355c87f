use std::net::{TcpListener, TcpStream};
use std::thread;

use rawedge_core::codec::{decode_frame, default_weights, encode_frame, CodecConfig, TileGrid, DEFAULT_FILL};
use rawedge_core::controller::{Controller, Lut};
use rawedge_core::eval::{resolve_lut, Detector};
use rawedge_core::netsim::{BandwidthTrace, TICK};
use rawedge_core::par::Strategy;
use rawedge_core::pipeline::{
    run_client, run_server, run_simulation, ClientConfig, EdgeServer, ExecutionMode, FrameGeometry, FrameMessage,
    Scenario, SimConfig, SimulationRun, StageTiming, TilePolicy, FRAME_HEADER_LEN,
};
use rawedge_core::rawframe::{CfaPattern, SceneParams, SceneStream};

fn small_scenario() -> Scenario {
    Scenario { width: 384, height: 256, overlap: 16, frames: 40, profile_scenes: 3, ..Scenario::default() }
}

fn lut_for(s: &Scenario) -> Lut {
    resolve_lut(s, &default_weights()).unwrap().0
}

fn simulate(s: &Scenario, lut: &Lut, cfg: &SimConfig, trace: &BandwidthTrace) -> SimulationRun {
    let weights = default_weights();
    let server = EdgeServer::new(weights.clone(), Detector::default());
    let ctl = Controller::new(lut.clone(), s.grid().unwrap(), s.window).unwrap();
    run_simulation(s.scenes().unwrap().take(s.frames), trace, ctl, &weights, &server, cfg).unwrap()
}

#[test]
fn identical_inputs_give_identical_runs() {
    let s = small_scenario();
    let lut = lut_for(&s);
    let trace = s.trace().unwrap();
    let a = simulate(&s, &lut, &s.sim, &trace);
    let b = simulate(&s, &lut, &SimConfig { strategy: Strategy::Sequential, ..s.sim.clone() }, &trace);
    assert_eq!(a, b);
}

#[test]
fn latency_splits_into_service_and_waiting() {
    let s = small_scenario();
    let lut = lut_for(&s);
    for mode in [ExecutionMode::Serialized, ExecutionMode::Pipelined] {
        let run = simulate(&s, &lut, &SimConfig { mode, ..s.sim.clone() }, &s.trace().unwrap());
        for m in &run.frames {
            let sum = m.service_time + m.queue_wait;
            assert!((m.e2e_latency - sum).abs() <= TICK, "{mode} frame {}: {} vs {sum}", m.frame_id, m.e2e_latency);
            assert!(m.queue_wait >= -TICK);
        }
    }
}

#[test]
fn saturated_pipeline_runs_at_its_slowest_stage() {
    let s = small_scenario();
    let lut = lut_for(&s);
    let timing = StageTiming { capture: 0.002, demosaic: 0.012, encode: 0.006, decode: 0.004, inference: 0.015, render: 0.001 };
    let cfg = SimConfig { timing, capture_interval: 0.0, ..s.sim.clone() };
    let run = simulate(&s, &lut, &cfg, &BandwidthTrace::constant(1e12).unwrap());
    let expected = 1.0 / timing.inference;
    let got = run.summary.steady_throughput;
    assert!((got - expected).abs() / expected < 0.01, "{got} vs {expected}");

    let merged = simulate(&s, &lut, &SimConfig { server_overlap: false, ..cfg }, &BandwidthTrace::constant(1e12).unwrap());
    let expected = 1.0 / (timing.decode + timing.inference);
    let got = merged.summary.steady_throughput;
    assert!((got - expected).abs() / expected < 0.01, "{got} vs {expected}");
}

#[test]
fn pipelining_never_adds_latency_on_a_paced_stream() {
    let s = small_scenario();
    let lut = lut_for(&s);
    let trace = BandwidthTrace::constant(1e9).unwrap();
    let cfg = SimConfig { policy: TilePolicy::AllTiles, ..s.sim.clone() };
    let serial = simulate(&s, &lut, &SimConfig { mode: ExecutionMode::Serialized, ..cfg.clone() }, &trace);
    let piped = simulate(&s, &lut, &cfg, &trace);
    for (a, b) in serial.frames.iter().zip(&piped.frames) {
        assert!(b.e2e_latency <= a.e2e_latency + TICK);
    }
    assert!(piped.summary.throughput >= serial.summary.throughput);
}

#[test]
fn all_tiles_policy_sends_every_tile() {
    let s = small_scenario();
    let lut = lut_for(&s);
    let cfg = SimConfig { policy: TilePolicy::AllTiles, ..s.sim.clone() };
    let run = simulate(&s, &lut, &cfg, &s.trace().unwrap());
    assert!(run.frames.iter().all(|m| m.tiles_sent == 12));
}

#[test]
fn empty_scene_sends_headers_only_after_the_key_frame() {
    let s = Scenario { objects: 0, frames: 35, ..small_scenario() };
    let lut = lut_for(&s);
    let run = simulate(&s, &lut, &s.sim, &s.trace().unwrap());
    for m in &run.frames {
        if m.key_frame {
            assert_eq!(m.tiles_sent, 12);
        } else {
            assert_eq!((m.tiles_sent, m.transmitted_bytes), (0, FRAME_HEADER_LEN), "frame {}", m.frame_id);
        }
    }
    let keys: Vec<u64> = run.frames.iter().filter(|m| m.key_frame).map(|m| m.frame_id).collect();
    assert_eq!(keys, vec![0, 30]);
}

#[test]
fn slow_link_degrades_configuration() {
    let s = Scenario { objects: 6, ..small_scenario() };
    let lut = lut_for(&s);
    let fast = simulate(&s, &lut, &s.sim, &BandwidthTrace::constant(1e9).unwrap());
    let slow = simulate(&s, &lut, &s.sim, &BandwidthTrace::constant(20_000.0).unwrap());
    let cost = |r: &SimulationRun| r.frames.iter().skip(3).map(|m| m.transmitted_bytes).sum::<usize>();
    assert!(cost(&slow) < cost(&fast));
    assert!(slow.frames.iter().skip(3).any(|m| !m.key_frame && m.config_used == lut.cheapest().config));
}

#[test]
fn server_sees_what_the_client_encoded() {
    let weights = default_weights();
    let grid = TileGrid::new(384, 256, 4, 3, 16).unwrap();
    let mut scenes = SceneStream::new(5, 384, 256, 3, CfaPattern::Bggr, SceneParams::default()).unwrap();
    let scene = scenes.next_scene();
    let server = EdgeServer::new(weights.clone(), Detector::default());
    for config in CodecConfig::ALL {
        let tiles = [1usize, 4, 5, 11];
        let enc = encode_frame(&scene.frame, &grid, &tiles, config, &weights, Strategy::Parallel).unwrap();
        let local = decode_frame(&enc.tiles, &grid, CfaPattern::Bggr, &weights, DEFAULT_FILL, Strategy::Sequential)
            .unwrap();
        let msg = FrameMessage {
            frame_id: 9,
            key_frame: false,
            config,
            quant: enc.quant,
            geometry: FrameGeometry::from_grid(&grid, CfaPattern::Bggr).unwrap(),
            tiles: enc.tiles,
        };
        let remote = server.reconstruct(&FrameMessage::from_bytes(&msg.to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(local, remote, "{config}");
    }
}

#[test]
fn tcp_loopback_delivers_every_frame() {
    let s = Scenario { frames: 12, ..small_scenario() };
    let lut = lut_for(&s);
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = EdgeServer::new(default_weights(), Detector::default());
    let handle = thread::spawn(move || run_server(&listener, &server, Some(2)).unwrap());

    for mode in [ExecutionMode::Serialized, ExecutionMode::Pipelined] {
        let ctl = Controller::new(lut.clone(), s.grid().unwrap(), s.window).unwrap();
        let cfg = ClientConfig { mode, capture_interval: 0.005, ..ClientConfig::default() };
        let stream = TcpStream::connect(addr).unwrap();
        let frames = run_client(stream, s.scenes().unwrap().take(s.frames), ctl, default_weights(), &cfg).unwrap();
        assert_eq!(frames.len(), s.frames, "{mode}");
        assert!(frames.iter().all(|m| !m.dropped), "{mode}");
        assert!(frames[0].key_frame && frames[0].tiles_sent == 12);
        assert!(frames.iter().all(|m| m.e2e_latency >= 0.0));
        // The key frame shows every object, so its detections match the truth.
        assert_eq!(frames[0].detections.len(), frames[0].truth.len(), "{mode}");
    }
    assert_eq!(handle.join().unwrap(), 24);
}
