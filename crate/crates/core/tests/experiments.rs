use rawedge_core::codec::{default_weights, CodecConfig, TileGrid};
use rawedge_core::eval::{generate_corpus, profile_offline, run_experiment, Detector, ExperimentConfig};
use rawedge_core::par::Strategy;
use rawedge_core::pipeline::{Scenario, TilePolicy};
use rawedge_core::rawframe::CfaPattern;

fn small() -> Scenario {
    Scenario { width: 384, height: 256, overlap: 16, frames: 30, profile_scenes: 4, ..Scenario::default() }
}

#[test]
fn compressed_size_follows_raw_len() {
    let corpus = generate_corpus(21, 10, 384, 256, 4, CfaPattern::Gbrg).unwrap();
    let grid = TileGrid::new(384, 256, 4, 3, 16).unwrap();
    let p = profile_offline(&corpus, &default_weights(), &Detector::default(), &grid, 0.03, Strategy::Parallel)
        .unwrap();
    let order = CodecConfig::by_raw_len();
    for w in order.windows(2) {
        let (a, b) = (p.row(w[0]), p.row(w[1]));
        assert!(a.mean_payload_bytes <= b.mean_payload_bytes, "{} vs {}", a.config, b.config);
        assert!(a.mse >= b.mse);
    }
    assert!(p.row(CodecConfig::highest()).map >= p.row(CodecConfig::lowest()).map);
}

#[test]
fn dim_captures_lose_accuracy() {
    let bright = run_experiment(&ExperimentConfig::new(small())).unwrap();
    let dim = run_experiment(&ExperimentConfig { luminosity: Some(0.25), ..ExperimentConfig::new(small()) }).unwrap();
    assert!(bright.run.summary.map > 0.9);
    assert!(dim.run.summary.map < bright.run.summary.map, "{} vs {}", dim.run.summary.map, bright.run.summary.map);
}

#[test]
fn reruns_are_identical_and_reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { output: Some(dir.path().join("out")), ..ExperimentConfig::new(small()) };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.run, b.run);
    assert_eq!(a.lut, b.lut);
    let csv = std::fs::read_to_string(dir.path().join("out/frames.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap().contains("map = "));
}

#[test]
fn tile_selection_saves_bytes_on_sparse_scenes() {
    let s = Scenario { objects: 1, ..small() };
    let adaptive = run_experiment(&ExperimentConfig::new(s.clone())).unwrap().run.summary;
    let all = run_experiment(&ExperimentConfig { policy: Some(TilePolicy::AllTiles), ..ExperimentConfig::new(s) })
        .unwrap()
        .run
        .summary;
    assert!(adaptive.mean_frame_bytes < all.mean_frame_bytes);
    assert_eq!(all.mean_tiles, 12.0);
    assert!((adaptive.map - all.map).abs() <= 0.01);
}
