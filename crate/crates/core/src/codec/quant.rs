use super::FeatureMap;
use crate::error::{Error, Result};

/// Affine u8 quantization range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    lo: f32,
    hi: f32,
}

impl QuantParams {
    pub fn new(lo: f32, hi: f32) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidArgument(format!("invalid quantization range [{lo}, {hi}]")));
        }
        Ok(QuantParams { lo, hi })
    }

    pub fn lo(&self) -> f32 {
        self.lo
    }

    pub fn hi(&self) -> f32 {
        self.hi
    }

    /// Half of one quantization step.
    pub fn max_error(&self) -> f64 {
        (self.hi as f64 - self.lo as f64) / 510.0
    }
}

impl Default for QuantParams {
    fn default() -> Self {
        QuantParams { lo: 0.0, hi: 255.0 }
    }
}

/// `x -> clamp(round((x - lo) * 255 / (hi - lo)), 0, 255)`, rounding half away from zero.
pub fn quantize(feat: &FeatureMap, q: QuantParams) -> Vec<u8> {
    let lo = q.lo as f64;
    let scale = 255.0 / (q.hi as f64 - lo);
    feat.data
        .iter()
        .map(|&x| ((x as f64 - lo) * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn dequantize(bytes: &[u8], q: QuantParams, dims: (usize, usize, usize)) -> Result<FeatureMap> {
    let (c, h, w) = dims;
    if bytes.len() != c * h * w {
        return Err(Error::mismatch(c * h * w, bytes.len()));
    }
    let lo = q.lo as f64;
    let span = q.hi as f64 - lo;
    let data = bytes.iter().map(|&b| (lo + b as f64 * span / 255.0) as f32).collect();
    FeatureMap::new(c, h, w, data)
}

/// Global min/max of the samples; a degenerate range is widened by one unit.
pub fn calibrate(samples: impl IntoIterator<Item = f32>) -> Result<QuantParams> {
    let mut range: Option<(f32, f32)> = None;
    for x in samples {
        if !x.is_finite() {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        range = Some(match range {
            None => (x, x),
            Some((lo, hi)) => (lo.min(x), hi.max(x)),
        });
    }
    let (lo, hi) = range.ok_or_else(|| Error::InvalidArgument("cannot calibrate on no samples".into()))?;
    QuantParams::new(lo, if lo == hi { lo + 1.0 } else { hi })
}
