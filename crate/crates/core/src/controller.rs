//! Dynamic transmission control.
//!
//! Every frame the controller decides which tiles to send and at which codec
//! configuration. The first frame of each window is a key frame: all tiles
//! at the most accurate configuration. Other frames send only tiles touched
//! by the previous detections and pick the most accurate configuration whose
//! profiled per-tile bandwidth, times the tile count, fits the estimated
//! available bandwidth.

use std::fmt::Write as _;
use std::path::Path;

use crate::codec::{CodecConfig, TileGrid};
use crate::error::{Error, Result};
use crate::rawframe::BoundingBox;

/// Default key-frame window in frames.
pub const DEFAULT_WINDOW: usize = 30;

/// Detections below this confidence do not steer tile selection.
pub const DEFAULT_MIN_CONFIDENCE: f32 = 0.25;

/// Offline profile of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEntry {
    pub config: CodecConfig,
    pub accuracy: f64,
    /// Mean encoded bytes per tile.
    pub tile_bytes: f64,
    /// Per-frame transmission time budget in seconds.
    pub tx_threshold: f64,
}

impl ProfileEntry {
    pub fn new(config: CodecConfig, accuracy: f64, tile_bytes: f64, tx_threshold: f64) -> Result<Self> {
        if !(tile_bytes > 0.0 && tile_bytes.is_finite()) {
            return Err(Error::InvalidArgument(format!("tile size must be positive, got {tile_bytes}")));
        }
        if !(tx_threshold > 0.0 && tx_threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "transmission threshold must be positive, got {tx_threshold}"
            )));
        }
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::InvalidArgument(format!("accuracy {accuracy} outside [0, 1]")));
        }
        Ok(ProfileEntry { config, accuracy, tile_bytes, tx_threshold })
    }

    /// Bytes per second needed to move one tile within the threshold.
    pub fn bandwidth(&self) -> f64 {
        self.tile_bytes / self.tx_threshold
    }
}

/// Profile entries sorted by accuracy, most accurate first; equal accuracy
/// puts the cheaper configuration first.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut {
    entries: Vec<ProfileEntry>,
}

impl Lut {
    pub fn new(mut entries: Vec<ProfileEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("LUT needs at least one entry".into()));
        }
        for (i, a) in entries.iter().enumerate() {
            if entries[i + 1..].iter().any(|b| b.config == a.config) {
                return Err(Error::InvalidArgument(format!("config {} profiled twice", a.config)));
            }
        }
        entries.sort_by(|a, b| {
            b.accuracy
                .total_cmp(&a.accuracy)
                .then(a.bandwidth().total_cmp(&b.bandwidth()))
                .then(a.config.id().cmp(&b.config.id()))
        });
        Ok(Lut { entries })
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    /// The configuration a key frame uses.
    pub fn best(&self) -> &ProfileEntry {
        &self.entries[0]
    }

    pub fn cheapest(&self) -> &ProfileEntry {
        self.entries
            .iter()
            .min_by(|a, b| a.bandwidth().total_cmp(&b.bandwidth()))
            .expect("LUT is never empty")
    }

    /// Parses `config_id accuracy tile_bytes tx_threshold_ms` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::format("LUT", format!("line {}: expected `id accuracy bytes ms`", n + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let id: u8 = f[0].parse().map_err(|_| bad())?;
            let nums: Vec<f64> =
                f[1..].iter().map(|s| s.parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
            entries.push(ProfileEntry::new(CodecConfig::from_id(id)?, nums[0], nums[1], nums[2] / 1000.0)?);
        }
        Lut::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# config_id accuracy tile_bytes tx_threshold_ms\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                e.config.id(),
                e.accuracy,
                e.tile_bytes,
                e.tx_threshold * 1000.0
            );
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Builds a LUT from measured `(config, accuracy, mean tile bytes)` rows.
pub fn build_lut(profiles: &[(CodecConfig, f64, f64)], tx_threshold: f64) -> Result<Lut> {
    for cfg in CodecConfig::ALL {
        if !profiles.iter().any(|p| p.0 == cfg) {
            return Err(Error::InvalidArgument(format!("no profile for config {cfg}")));
        }
    }
    let entries = profiles
        .iter()
        .map(|&(cfg, acc, bytes)| ProfileEntry::new(cfg, acc, bytes, tx_threshold))
        .collect::<Result<Vec<_>>>()?;
    Lut::new(entries)
}

/// One completed transmission, as seen by the sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSample {
    pub bytes: u64,
    pub t_start: f64,
    pub t_end: f64,
}

/// Time-differential estimate: bytes over elapsed seconds.
pub fn estimate_bandwidth(sample: &BandwidthSample) -> Result<f64> {
    let dt = sample.t_end - sample.t_start;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("transmission interval {dt} s is not positive")));
    }
    Ok(sample.bytes as f64 / dt)
}

/// Tiles whose encoded extent overlaps any box with positive area, ascending.
pub fn select_tiles(grid: &TileGrid, boxes: &[BoundingBox]) -> Vec<usize> {
    let boxes: Vec<BoundingBox> =
        boxes.iter().filter_map(|b| b.clamp_to(grid.frame_width(), grid.frame_height())).collect();
    grid.rects()
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            let tile = BoundingBox::truth(0, r.x as f32, r.y as f32, r.w as f32, r.h as f32);
            boxes.iter().any(|b| tile.intersection_area(b) > 0.0)
        })
        .map(|(i, _)| i)
        .collect()
}

/// First entry (accuracy order) whose bandwidth for `tiles` fits `eab`;
/// the cheapest entry when none fits.
pub fn select_config(lut: &Lut, tiles: usize, eab: f64) -> CodecConfig {
    if tiles == 0 {
        return lut.best().config;
    }
    lut.entries()
        .iter()
        .find(|e| e.bandwidth() * tiles as f64 <= eab)
        .unwrap_or_else(|| lut.cheapest())
        .config
}

/// What the encoder should do with the current frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionPlan {
    pub tiles: Vec<usize>,
    pub config: CodecConfig,
    pub key_frame: bool,
}

/// Per-stream controller state.
#[derive(Debug, Clone)]
pub struct Controller {
    lut: Lut,
    grid: TileGrid,
    window: usize,
    frame_count: usize,
    min_confidence: f32,
    last_results: Vec<BoundingBox>,
    pending: Vec<(Option<Vec<usize>>, Vec<BoundingBox>)>,
}

impl Controller {
    pub fn new(lut: Lut, grid: TileGrid, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("window length must be at least 1".into()));
        }
        Ok(Controller {
            lut,
            grid,
            window,
            frame_count: 1,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            last_results: Vec::new(),
            pending: Vec::new(),
        })
    }

    pub fn with_min_confidence(mut self, min_confidence: f32) -> Self {
        self.min_confidence = min_confidence;
        self
    }

    pub fn lut(&self) -> &Lut {
        &self.lut
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Position of the next frame inside its window, starting at 1.
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn last_results(&self) -> &[BoundingBox] {
        &self.last_results
    }

    /// Hands over detections covering the whole frame. They take effect at
    /// the next frame boundary.
    pub fn deliver_results(&mut self, boxes: Vec<BoundingBox>) {
        self.pending.push((None, boxes));
    }

    /// Hands over detections for a frame that carried only `sent_tiles`.
    /// Earlier boxes lying entirely outside the cores of those tiles were
    /// not observed and are kept.
    pub fn deliver_feedback(&mut self, sent_tiles: &[usize], boxes: Vec<BoundingBox>) {
        self.pending.push((Some(sent_tiles.to_vec()), boxes));
    }

    fn apply_pending(&mut self) {
        for (tiles, boxes) in std::mem::take(&mut self.pending) {
            let mut next: Vec<BoundingBox> =
                boxes.into_iter().filter(|b| b.confidence >= self.min_confidence).collect();
            if let Some(tiles) = tiles {
                let cores: Vec<BoundingBox> = tiles
                    .iter()
                    .filter_map(|&i| self.grid.rect(i).ok())
                    .map(|r| BoundingBox::truth(0, r.core_x as f32, r.core_y as f32, r.core_w as f32, r.core_h as f32))
                    .collect();
                next.extend(
                    self.last_results.iter().filter(|b| cores.iter().all(|c| c.intersection_area(b) == 0.0)),
                );
            }
            self.last_results = next;
        }
    }

    /// Plans the next frame given the current bandwidth estimate.
    pub fn adapt(&mut self, eab: f64) -> TransmissionPlan {
        self.apply_pending();
        let plan = if self.frame_count == 1 {
            TransmissionPlan {
                tiles: (0..self.grid.tile_count()).collect(),
                config: self.lut.best().config,
                key_frame: true,
            }
        } else {
            let tiles = select_tiles(&self.grid, &self.last_results);
            let config = select_config(&self.lut, tiles.len(), eab);
            TransmissionPlan { tiles, config, key_frame: false }
        };
        self.frame_count = if self.frame_count == self.window { 1 } else { self.frame_count + 1 };
        plan
    }
}
