use super::weights::{DecoderWeights, EncoderWeights, ResidualStage, Tensor};
use super::CodecConfig;
use crate::error::{Error, Result};
use crate::rawframe::{disassemble, reassemble, BayerFrame, CfaPattern, PlanarFrame};

/// Channel-major real-valued feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::mismatch(channels * height * width, data.len()));
        }
        Ok(FeatureMap { channels, height, width, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Pixel scale of the network domain: samples enter the encoder as
/// `value / 255` and leave the decoder multiplied back.
pub const PIXEL_SCALE: f32 = 255.0;

/// Compresses a tile with the patch convolution of `config`.
pub fn encode(tile: &BayerFrame, config: CodecConfig, weights: &EncoderWeights) -> Result<FeatureMap> {
    let (c, fh, fw) = config.feature_dims(tile.width(), tile.height())?;
    let layer = weights
        .layers
        .get(config.id() as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("no encoder layer for {config}")))?;
    let s = config.stride();
    if layer.kernel.dims != [c, 4, s, s] || layer.bias.len() != c {
        return Err(Error::mismatch(format!("encoder ({c},4,{s},{s})"), format!("{:?}", layer.kernel.dims)));
    }
    let planar = disassemble(tile);
    let pw = planar.width();
    let planes = planar.planes();

    let mut data = vec![0f32; c * fh * fw];
    for o in 0..c {
        // Non-zero taps only; default kernels are sparse across planes.
        let taps: Vec<(usize, usize, usize, f32)> = (0..4)
            .flat_map(|p| (0..s).flat_map(move |dy| (0..s).map(move |dx| (p, dy, dx))))
            .map(|(p, dy, dx)| (p, dy, dx, layer.kernel.at(&[o, p, dy, dx])))
            .filter(|t| t.3 != 0.0)
            .collect();
        let out = &mut data[o * fh * fw..(o + 1) * fh * fw];
        for i in 0..fh {
            for j in 0..fw {
                let mut acc = layer.bias[o];
                for &(p, dy, dx, k) in &taps {
                    acc += k * (planes[p][(i * s + dy) * pw + j * s + dx] as f32 / PIXEL_SCALE);
                }
                out[i * fw + j] = acc;
            }
        }
    }
    FeatureMap::new(c, fh, fw, data)
}

/// 3x3 zero-padded convolution over a `(channels, h, w)` buffer.
fn conv3x3(input: &[f32], kernel: &Tensor, bias: &[f32], h: usize, w: usize) -> Vec<f32> {
    let (out_c, in_c) = (kernel.dims[0], kernel.dims[1]);
    let mut out = vec![0f32; out_c * h * w];
    for o in 0..out_c {
        let dst = &mut out[o * h * w..(o + 1) * h * w];
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..in_c {
            let src = &input[i * h * w..(i + 1) * h * w];
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = kernel.at(&[o, i, ky, kx]);
                    if k == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for x in 0..w {
                            let sx = x as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            dst[y * w + x] += k * src[sy as usize * w + sx as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

fn apply_stage(stage: &ResidualStage, x: &mut [f32], h: usize, w: usize) {
    if stage.is_identity() {
        return;
    }
    let mut hidden = conv3x3(x, &stage.conv1, &stage.bias1, h, w);
    hidden.iter_mut().for_each(|v| *v = v.max(0.0));
    let residual = conv3x3(&hidden, &stage.conv2, &stage.bias2, h, w);
    x.iter_mut().zip(residual).for_each(|(a, r)| *a += r);
}

/// Reconstructs the tile a feature map was encoded from.
pub fn decode(
    feat: &FeatureMap,
    config: CodecConfig,
    weights: &DecoderWeights,
    pattern: CfaPattern,
) -> Result<BayerFrame> {
    let (s, c) = (config.stride(), config.channels());
    if feat.channels != c || feat.height == 0 || feat.width == 0 {
        return Err(Error::mismatch(format!("{c} channels for {config}"), feat.channels));
    }
    let head = weights
        .heads
        .get(config.id() as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("no decoder head for {config}")))?;
    let t = weights.trunk_width();
    if head.kernel.dims != [t, c, s, s] || head.bias.len() != t {
        return Err(Error::mismatch(format!("head ({t},{c},{s},{s})"), format!("{:?}", head.kernel.dims)));
    }
    let (fh, fw) = (feat.height, feat.width);
    let (ph, pw) = (fh * s, fw * s);

    // Head: transposed patch convolution, upsampling by the stride.
    let mut trunk = vec![0f32; t * ph * pw];
    for o in 0..t {
        let dst = &mut trunk[o * ph * pw..(o + 1) * ph * pw];
        dst.iter_mut().for_each(|v| *v = head.bias[o]);
        for ci in 0..c {
            let src = &feat.data[ci * fh * fw..(ci + 1) * fh * fw];
            for dy in 0..s {
                for dx in 0..s {
                    let k = head.kernel.at(&[o, ci, dy, dx]);
                    if k == 0.0 {
                        continue;
                    }
                    for i in 0..fh {
                        let row = &mut dst[(i * s + dy) * pw..(i * s + dy + 1) * pw];
                        for j in 0..fw {
                            row[j * s + dx] += k * src[i * fw + j];
                        }
                    }
                }
            }
        }
    }

    for stage in &weights.trunk {
        apply_stage(stage, &mut trunk, ph, pw);
    }

    let planes: [Vec<u8>; 4] = std::array::from_fn(|p| {
        let mut acc = vec![weights.projection_bias[p]; ph * pw];
        for ch in 0..t {
            let k = weights.projection.at(&[p, ch]);
            if k == 0.0 {
                continue;
            }
            let src = &trunk[ch * ph * pw..(ch + 1) * ph * pw];
            acc.iter_mut().zip(src).for_each(|(a, &v)| *a += k * v);
        }
        acc.into_iter().map(|v| (v * PIXEL_SCALE).round().clamp(0.0, 255.0) as u8).collect()
    });
    Ok(reassemble(&PlanarFrame::new(pw, ph, planes)?, pattern))
}

/// Encode then decode without quantization; handy for fidelity measurements.
#[cfg(test)]
pub(crate) fn roundtrip(tile: &BayerFrame, config: CodecConfig, weights: &super::weights::CodecWeights) -> Result<BayerFrame> {
    decode(&encode(tile, config, &weights.encoder)?, config, &weights.decoder, tile.pattern())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{default_weights, mse};
    use crate::rawframe::generate_scene;

    #[test]
    fn uniform_tile_roundtrips_exactly() {
        let w = default_weights();
        let tile = BayerFrame::filled(64, 48, CfaPattern::Grbg, 173).unwrap();
        for cfg in CodecConfig::ALL {
            let feat = encode(&tile, cfg, &w.encoder).unwrap();
            assert!(feat.data.iter().all(|&v| (v * PIXEL_SCALE - 173.0).abs() < 1e-4), "{cfg}");
            let back = decode(&feat, cfg, &w.decoder, tile.pattern()).unwrap();
            assert_eq!(back, tile, "{cfg}");
        }
    }

    #[test]
    fn output_shapes_follow_the_shape_law() {
        let w = default_weights();
        let tile = BayerFrame::filled(1088, 576, CfaPattern::Rggb, 0).unwrap();
        let f44 = encode(&tile, CodecConfig::from_shape(4, 4).unwrap(), &w.encoder).unwrap();
        assert_eq!(f44.dims(), (4, 72, 136));
        let f28 = encode(&tile, CodecConfig::from_shape(2, 8).unwrap(), &w.encoder).unwrap();
        assert_eq!(f28.dims(), (8, 144, 272));
        let odd = BayerFrame::filled(36, 24, CfaPattern::Rggb, 0).unwrap();
        assert!(encode(&odd, CodecConfig::from_shape(4, 4).unwrap(), &w.encoder).is_err());
    }

    #[test]
    fn decode_rejects_wrong_channel_count() {
        let w = default_weights();
        let feat = FeatureMap::new(4, 2, 2, vec![0.0; 16]).unwrap();
        assert!(decode(&feat, CodecConfig::highest(), &w.decoder, CfaPattern::Rggb).is_err());
    }

    #[test]
    fn fidelity_is_monotone_in_payload_size() {
        let w = default_weights();
        let scene = generate_scene(11, 256, 192, 5, CfaPattern::Rggb).unwrap();
        let errs: Vec<f64> = CodecConfig::by_raw_len()
            .iter()
            .map(|&cfg| {
                let back = roundtrip(&scene.frame, cfg, &w).unwrap();
                mse(scene.frame.pixels(), back.pixels()).unwrap()
            })
            .collect();
        assert!(errs.windows(2).all(|p| p[1] <= p[0]), "{errs:?}");
    }

    #[test]
    fn nontrivial_trunk_changes_output() {
        let mut w = default_weights();
        w.decoder.trunk[0].bias2 = vec![3.0 / PIXEL_SCALE; w.decoder.trunk_width()];
        let tile = BayerFrame::filled(16, 16, CfaPattern::Rggb, 100).unwrap();
        let cfg = CodecConfig::highest();
        let back = roundtrip(&tile, cfg, &w).unwrap();
        assert!(back.pixels().iter().all(|&p| p == 103));
    }
}
