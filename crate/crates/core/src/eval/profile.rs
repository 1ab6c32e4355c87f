use super::detect::Detector;
use super::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use crate::codec::{decode_frame, encode_frame, mse, CodecConfig, CodecWeights, TileGrid, DEFAULT_FILL};
use crate::controller::{build_lut, Lut};
use crate::error::{Error, Result};
use crate::par::{self, Strategy};
use crate::pipeline::FRAME_HEADER_LEN;
use crate::rawframe::{demosaic_bilinear, generate_scene, BoundingBox, CfaPattern, SyntheticScene};

/// Offline measurements for one configuration over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub config: CodecConfig,
    pub map: f64,
    pub f1: f64,
    /// Key-frame message size (all tiles, header included).
    pub mean_frame_bytes: f64,
    /// Tile record size including its header; this is what the LUT stores.
    pub mean_tile_bytes: f64,
    pub mean_payload_bytes: f64,
    /// Reconstruction error of the raw frame.
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    /// In [`CodecConfig::ALL`] order.
    pub rows: Vec<ProfileRow>,
    pub lut: Lut,
}

impl Profile {
    pub fn row(&self, config: CodecConfig) -> &ProfileRow {
        self.rows.iter().find(|r| r.config == config).expect("every configuration is profiled")
    }
}

/// `count` scenes with seeds `seed, seed + 1, ...`.
pub fn generate_corpus(
    seed: u64,
    count: usize,
    width: usize,
    height: usize,
    objects: usize,
    pattern: CfaPattern,
) -> Result<Vec<SyntheticScene>> {
    (0..count as u64).map(|i| generate_scene(seed + i, width, height, objects, pattern)).collect()
}

struct SceneOutcome {
    detections: Vec<BoundingBox>,
    frame_bytes: usize,
    payload_bytes: usize,
    tiles: usize,
    sq_err: f64,
    pixels: usize,
}

/// Round-trips every scene through each configuration with all tiles and
/// scores the detector on the reconstructions.
pub fn profile_offline(
    corpus: &[SyntheticScene],
    weights: &CodecWeights,
    detector: &Detector,
    grid: &TileGrid,
    tx_threshold: f64,
    strategy: Strategy,
) -> Result<Profile> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("profiling corpus is empty".into()));
    }
    let all: Vec<usize> = (0..grid.tile_count()).collect();
    let truths: Vec<Vec<BoundingBox>> = corpus.iter().map(|s| s.truth.clone()).collect();
    let mut rows = Vec::with_capacity(CodecConfig::ALL.len());
    for config in CodecConfig::ALL {
        let outcomes = par::try_map(strategy, corpus, |scene| {
            let enc = encode_frame(&scene.frame, grid, &all, config, weights, Strategy::Sequential)?;
            let back = decode_frame(&enc.tiles, grid, scene.frame.pattern(), weights, DEFAULT_FILL, Strategy::Sequential)?;
            let tile_bytes: usize = enc.tiles.iter().map(|t| t.wire_len()).sum();
            let n = scene.frame.pixels().len();
            Ok::<_, Error>(SceneOutcome {
                detections: detector.detect(&demosaic_bilinear(&back), 0.0),
                frame_bytes: FRAME_HEADER_LEN + tile_bytes,
                payload_bytes: enc.tiles.iter().map(|t| t.payload.len()).sum(),
                tiles: enc.tiles.len(),
                sq_err: mse(scene.frame.pixels(), back.pixels())? * n as f64,
                pixels: n,
            })
        })?;
        let dets: Vec<Vec<BoundingBox>> = outcomes.iter().map(|o| o.detections.clone()).collect();
        let acc = evaluate(&dets, &truths, DEFAULT_IOU_THRESHOLD)?;
        let frames = outcomes.len() as f64;
        let tiles: usize = outcomes.iter().map(|o| o.tiles).sum();
        let frame_bytes: usize = outcomes.iter().map(|o| o.frame_bytes).sum();
        let payload: usize = outcomes.iter().map(|o| o.payload_bytes).sum();
        rows.push(ProfileRow {
            config,
            map: acc.map,
            f1: acc.f1,
            mean_frame_bytes: frame_bytes as f64 / frames,
            mean_tile_bytes: (frame_bytes as f64 - FRAME_HEADER_LEN as f64 * frames) / tiles as f64,
            mean_payload_bytes: payload as f64 / tiles as f64,
            mse: outcomes.iter().map(|o| o.sq_err).sum::<f64>()
                / outcomes.iter().map(|o| o.pixels).sum::<usize>() as f64,
        });
    }
    let profiles: Vec<(CodecConfig, f64, f64)> = rows.iter().map(|r| (r.config, r.map, r.mean_tile_bytes)).collect();
    Ok(Profile { lut: build_lut(&profiles, tx_threshold)?, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::default_weights;

    #[test]
    fn small_corpus_profile() {
        let corpus = generate_corpus(100, 3, 384, 256, 2, CfaPattern::Rggb).unwrap();
        let grid = TileGrid::new(384, 256, 4, 3, 16).unwrap();
        let p = profile_offline(&corpus, &default_weights(), &Detector::default(), &grid, 0.03, Strategy::Parallel)
            .unwrap();
        assert_eq!(p.rows.len(), 4);
        assert_eq!(p.lut.entries().len(), 4);
        assert!(p.lut.entries().windows(2).all(|w| w[0].accuracy >= w[1].accuracy));
        for r in &p.rows {
            assert!((0.0..=1.0).contains(&r.map) && r.mse >= 0.0);
            assert!(r.mean_tile_bytes > r.mean_payload_bytes);
        }
        assert!(profile_offline(&[], &default_weights(), &Detector::default(), &grid, 0.03, Strategy::Parallel).is_err());
    }
}
