use proptest::prelude::*;
use rawedge_core::codec::TileGrid;
use rawedge_core::controller::select_tiles;
use rawedge_core::netsim::{generate_trace, LinkState, TraceParams};
use rawedge_core::pipeline::{ResultMessage, ResultStatus};
use rawedge_core::rawframe::{BoundingBox, CfaPattern, SceneParams, SceneStream};

/// True when every pixel of `b` lies in the core of some selected tile.
fn covered_by_cores(grid: &TileGrid, tiles: &[usize], b: &BoundingBox) -> bool {
    let (x0, y0) = (b.x.floor() as usize, b.y.floor() as usize);
    let (x1, y1) = (b.right().ceil() as usize, b.bottom().ceil() as usize);
    let cores: Vec<_> = tiles.iter().map(|&t| grid.rect(t).unwrap()).collect();
    (y0..y1.min(grid.frame_height())).all(|y| {
        (x0..x1.min(grid.frame_width())).all(|x| {
            cores.iter().any(|r| (r.core_x..r.core_x + r.core_w).contains(&x) && (r.core_y..r.core_y + r.core_h).contains(&y))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// With perfect detections of the previous frame and motion bounded by
    /// the overlap, the tiles chosen from the previous boxes cover every
    /// object of the current frame with their cores.
    #[test]
    fn slow_objects_stay_inside_selected_cores(seed in any::<u64>(), speed in 0i32..=16, objects in 1usize..6) {
        let grid = TileGrid::new(384, 256, 4, 3, 16).unwrap();
        let params = SceneParams { max_speed: speed, ..SceneParams::default() };
        let mut stream = SceneStream::new(seed, 384, 256, objects, CfaPattern::Rggb, params).unwrap();
        let mut previous = stream.next_scene().truth;
        for _ in 0..10 {
            let scene = stream.next_scene();
            let tiles = select_tiles(&grid, &previous);
            for b in &scene.truth {
                prop_assert!(covered_by_cores(&grid, &tiles, b), "{b:?} not covered by {tiles:?}");
            }
            previous = scene.truth;
        }
    }

    #[test]
    fn link_completions_follow_submission_order(
        seed in any::<u64>(),
        gaps in proptest::collection::vec(0f64..0.05, 1..30),
        sizes in proptest::collection::vec(0u64..200_000, 30),
    ) {
        let trace = generate_trace(seed, &TraceParams::with_defaults(20.0, 2e6)).unwrap();
        let mut link = LinkState::new(trace);
        let mut at = 0.0;
        let mut last_end = 0.0;
        for (gap, bytes) in gaps.iter().zip(&sizes) {
            at += gap;
            let t = link.submit(at, *bytes).unwrap();
            prop_assert!(t.start >= at && t.end >= t.start && t.end >= last_end);
            prop_assert!(t.delivered >= t.end);
            last_end = t.end;
        }
    }

    #[test]
    fn result_messages_roundtrip(
        frame_id in any::<u64>(),
        boxes in proptest::collection::vec((any::<u16>(), 0f32..1.0, -1e4f32..1e4, -1e4f32..1e4, 0f32..1e3, 0f32..1e3), 0..40),
    ) {
        let detections: Vec<BoundingBox> = boxes
            .into_iter()
            .map(|(class_id, confidence, x, y, w, h)| BoundingBox { class_id, confidence, x, y, w, h })
            .collect();
        let msg = ResultMessage { frame_id, status: ResultStatus::Ok, detections };
        prop_assert_eq!(ResultMessage::from_bytes(&msg.to_bytes()).unwrap(), msg);
    }
}
