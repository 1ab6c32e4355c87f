//! `key = value` scenario files. Blank lines and `#` comments are ignored;
//! unknown keys are errors. Relative paths resolve against the file's
//! directory. Times are given in milliseconds, rates in Mbit/s.
//!
//! | key | default |
//! |-----|---------|
//! | `width`, `height` | 768, 512 |
//! | `pattern` | rggb |
//! | `objects` | 3 |
//! | `max_speed` | 2 (pixels per frame) |
//! | `frames` | 150 |
//! | `seed` | 1 |
//! | `rows`, `cols`, `overlap` | 4, 3, 32 |
//! | `window` | 30 |
//! | `tx_threshold_ms` | 30 |
//! | `capture_interval_ms` | 33.333 (0 = as fast as possible) |
//! | `capture_ms`, `demosaic_ms`, `encode_ms`, `decode_ms`, `inference_ms`, `render_ms` | 2, 12, 6, 4, 10, 1 |
//! | `mode` | pipelined (or serialized) |
//! | `policy` | default (or alltiles) |
//! | `luminosity` | 1.0 |
//! | `queue_capacity` | 2 |
//! | `server_overlap` | true |
//! | `propagation_delay_ms` | 2 |
//! | `rate_mbps` | 20 (constant link, used when no trace is set) |
//! | `trace` | path to a trace file |
//! | `trace_mean_mbps`, `trace_seed` | generate a random-walk trace instead |
//! | `weights` | path to a weight file (built-in weights otherwise) |
//! | `lut` | path to a LUT file (profiled at start-up otherwise) |
//! | `profile_scenes` | 12 |

use std::path::{Path, PathBuf};

use super::sim::{ExecutionMode, SimConfig, TilePolicy};
use crate::codec::{default_weights, load_weights, CodecWeights, TileGrid};
use crate::controller::{Lut, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::netsim::{generate_trace, load_trace, BandwidthTrace, TraceParams};
use crate::rawframe::{CfaPattern, SceneParams, SceneStream};

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    Constant { mbps: f64 },
    File(PathBuf),
    RandomWalk { mean_mbps: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub width: usize,
    pub height: usize,
    pub pattern: CfaPattern,
    pub objects: usize,
    pub max_speed: i32,
    pub frames: usize,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub overlap: usize,
    pub window: usize,
    /// Seconds.
    pub tx_threshold: f64,
    pub sim: SimConfig,
    pub trace: TraceSource,
    pub weights: Option<PathBuf>,
    pub lut: Option<PathBuf>,
    pub profile_scenes: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            width: 768,
            height: 512,
            pattern: CfaPattern::Rggb,
            objects: 3,
            max_speed: 2,
            frames: 150,
            seed: 1,
            rows: 4,
            cols: 3,
            overlap: 32,
            window: DEFAULT_WINDOW,
            tx_threshold: 0.030,
            sim: SimConfig::default(),
            trace: TraceSource::Constant { mbps: 20.0 },
            weights: None,
            lut: None,
            profile_scenes: 12,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::format("scenario", format!("`{key}`: cannot parse `{v}`")))
}

fn ms(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::format("scenario", format!("`{key}` must be a non-negative time")));
    }
    Ok(x / 1000.0)
}

impl Scenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s = Scenario::default();
        let mut trace_mean: Option<f64> = None;
        let mut trace_seed: u64 = 0;
        let mut trace_file = None;
        let mut rate = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::format("scenario", format!("line {}: expected `key = value`", n + 1)))?;
            let path = || base_dir.join(value);
            let t = &mut s.sim.timing;
            match key {
                "width" => s.width = num(key, value)?,
                "height" => s.height = num(key, value)?,
                "pattern" => s.pattern = value.parse()?,
                "objects" => s.objects = num(key, value)?,
                "max_speed" => s.max_speed = num(key, value)?,
                "frames" => s.frames = num(key, value)?,
                "seed" => s.seed = num(key, value)?,
                "rows" => s.rows = num(key, value)?,
                "cols" => s.cols = num(key, value)?,
                "overlap" => s.overlap = num(key, value)?,
                "window" => s.window = num(key, value)?,
                "tx_threshold_ms" => s.tx_threshold = ms(key, value)?,
                "capture_interval_ms" => s.sim.capture_interval = ms(key, value)?,
                "capture_ms" => t.capture = ms(key, value)?,
                "demosaic_ms" => t.demosaic = ms(key, value)?,
                "encode_ms" => t.encode = ms(key, value)?,
                "decode_ms" => t.decode = ms(key, value)?,
                "inference_ms" => t.inference = ms(key, value)?,
                "render_ms" => t.render = ms(key, value)?,
                "mode" => s.sim.mode = value.parse::<ExecutionMode>()?,
                "policy" => s.sim.policy = value.parse::<TilePolicy>()?,
                "luminosity" => s.sim.luminosity = num(key, value)?,
                "queue_capacity" => s.sim.queue_capacity = num(key, value)?,
                "server_overlap" => s.sim.server_overlap = num(key, value)?,
                "propagation_delay_ms" => s.sim.propagation_delay = ms(key, value)?,
                "rate_mbps" => rate = Some(num(key, value)?),
                "trace" => trace_file = Some(path()),
                "trace_mean_mbps" => trace_mean = Some(num(key, value)?),
                "trace_seed" => trace_seed = num(key, value)?,
                "weights" => s.weights = Some(path()),
                "lut" => s.lut = Some(path()),
                "profile_scenes" => s.profile_scenes = num(key, value)?,
                _ => return Err(Error::format("scenario", format!("unknown key `{key}`"))),
            }
        }
        let sources = rate.is_some() as u8 + trace_file.is_some() as u8 + trace_mean.is_some() as u8;
        if sources > 1 {
            return Err(Error::format("scenario", "set only one of rate_mbps, trace, trace_mean_mbps"));
        }
        if let Some(p) = trace_file {
            s.trace = TraceSource::File(p);
        } else if let Some(mean_mbps) = trace_mean {
            s.trace = TraceSource::RandomWalk { mean_mbps, seed: trace_seed };
        } else if let Some(mbps) = rate {
            s.trace = TraceSource::Constant { mbps };
        }
        if !(s.sim.luminosity > 0.0 && s.sim.luminosity <= 1.0) {
            return Err(Error::format("scenario", "luminosity must lie in (0, 1]"));
        }
        s.grid()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn grid(&self) -> Result<TileGrid> {
        TileGrid::new(self.width, self.height, self.rows, self.cols, self.overlap)
    }

    pub fn scene_params(&self) -> SceneParams {
        SceneParams { max_speed: self.max_speed, ..SceneParams::default() }
    }

    pub fn scenes(&self) -> Result<SceneStream> {
        SceneStream::new(self.seed, self.width, self.height, self.objects, self.pattern, self.scene_params())
    }

    /// Long enough to cover the run at the nominal capture rate, with slack.
    pub fn trace(&self) -> Result<BandwidthTrace> {
        const MBPS: f64 = 1e6 / 8.0;
        match &self.trace {
            TraceSource::Constant { mbps } => BandwidthTrace::constant(mbps * MBPS),
            TraceSource::File(p) => load_trace(p),
            TraceSource::RandomWalk { mean_mbps, seed } => {
                let duration = (self.frames as f64 * self.sim.capture_interval.max(1.0 / 30.0)) * 2.0 + 10.0;
                generate_trace(*seed, &TraceParams::with_defaults(duration, mean_mbps * MBPS))
            }
        }
    }

    pub fn codec_weights(&self) -> Result<CodecWeights> {
        match &self.weights {
            Some(p) => load_weights(p),
            None => Ok(default_weights()),
        }
    }

    pub fn load_lut(&self) -> Result<Option<Lut>> {
        self.lut.as_ref().map(Lut::load).transpose()
    }
}
