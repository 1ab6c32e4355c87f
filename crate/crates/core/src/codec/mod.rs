//! Tile-wise asymmetric codec for Bayer frames.
//!
//! A frame is cut into an `r x c` grid of overlapping tiles. Each tile is
//! split into its four CFA planes and compressed by a single patch
//! convolution whose stride and output width are chosen from four fixed
//! configurations. Features are quantized to u8 with frame-level bounds and
//! DEFLATE-coded. The decoder upsamples through a per-configuration head, a
//! shared residual trunk, and a projection back to the four planes.

mod distill;
mod entropy;
mod network;
mod quant;
mod tile_codec;
mod tiles;
mod weights;

pub use distill::{distill_weights, kd_loss, mse, LossReport};
pub use entropy::{entropy_decode, entropy_encode};
pub use network::{decode, encode, FeatureMap, PIXEL_SCALE};
pub use quant::{calibrate, dequantize, quantize, QuantParams};
pub use tile_codec::{
    decode_frame, decode_tile_full, encode_frame, encode_tile_full, EncodedFrame, EncodedTile,
    TILE_RECORD_HEADER_LEN,
};
pub use tiles::{assemble_canvas, partition, TileGrid, TileRect, DEFAULT_FILL, DEFAULT_OVERLAP};
pub use weights::{
    default_weights, load_weights, read_weights, save_weights, write_weights, CodecWeights,
    DecoderHead, DecoderWeights, EncoderLayer, EncoderWeights, ResidualStage, Tensor,
    DEFAULT_TRUNK_STAGES, DEFAULT_TRUNK_WIDTH,
};

use crate::error::{Error, Result};

/// One of the four (stride, channels) encoder settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodecConfig {
    id: u8,
    stride: usize,
    channels: usize,
}

impl CodecConfig {
    /// Indexed by id: 0 = (2,8) is the highest fidelity, 3 = (4,4) the lowest.
    pub const ALL: [CodecConfig; 4] = [
        CodecConfig { id: 0, stride: 2, channels: 8 },
        CodecConfig { id: 1, stride: 2, channels: 4 },
        CodecConfig { id: 2, stride: 4, channels: 8 },
        CodecConfig { id: 3, stride: 4, channels: 4 },
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown codec config id {id}")))
    }

    pub fn from_shape(stride: usize, channels: usize) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.stride == stride && c.channels == channels)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no codec config with stride {stride}, {channels} channels"))
            })
    }

    pub fn highest() -> Self {
        Self::ALL[0]
    }

    pub fn lowest() -> Self {
        Self::ALL[3]
    }

    /// All configs ordered by increasing payload size.
    pub fn by_raw_len() -> [CodecConfig; 4] {
        [Self::ALL[3], Self::ALL[2], Self::ALL[1], Self::ALL[0]]
    }

    pub fn id(self) -> u8 {
        self.id
    }

    pub fn stride(self) -> usize {
        self.stride
    }

    pub fn channels(self) -> usize {
        self.channels
    }

    /// Feature map shape `(channels, height, width)` for a tile.
    pub fn feature_dims(self, tile_width: usize, tile_height: usize) -> Result<(usize, usize, usize)> {
        let step = 2 * self.stride;
        if tile_width == 0 || tile_height == 0 || !tile_width.is_multiple_of(step) || !tile_height.is_multiple_of(step) {
            return Err(Error::Geometry(format!(
                "tile {tile_width}x{tile_height} is not divisible by {step} for config {self}"
            )));
        }
        Ok((self.channels, tile_height / step, tile_width / step))
    }

    /// Quantized feature bytes for a tile: `c * H * W / (4 s^2)`.
    pub fn raw_len(self, tile_width: usize, tile_height: usize) -> Result<usize> {
        self.feature_dims(tile_width, tile_height).map(|(c, h, w)| c * h * w)
    }
}

impl std::fmt::Display for CodecConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.stride, self.channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_table() {
        let shapes: Vec<_> = CodecConfig::ALL.iter().map(|c| (c.stride(), c.channels())).collect();
        assert_eq!(shapes, vec![(2, 8), (2, 4), (4, 8), (4, 4)]);
        assert_eq!(CodecConfig::from_shape(4, 8).unwrap().id(), 2);
        assert!(CodecConfig::from_shape(3, 8).is_err());
        assert!(CodecConfig::from_id(4).is_err());
    }

    #[test]
    fn shape_examples() {
        let c44 = CodecConfig::from_shape(4, 4).unwrap();
        let c28 = CodecConfig::from_shape(2, 8).unwrap();
        assert_eq!(c44.feature_dims(1088, 576).unwrap(), (4, 72, 136));
        assert_eq!(c28.feature_dims(1088, 576).unwrap(), (8, 144, 272));
        assert_eq!(c44.raw_len(1088, 576).unwrap(), 39168);
        assert!(c44.feature_dims(1084, 576).is_err());
    }

    #[test]
    fn raw_len_strictly_increases_along_ordering() {
        let lens: Vec<usize> =
            CodecConfig::by_raw_len().iter().map(|c| c.raw_len(320, 192).unwrap()).collect();
        assert!(lens.windows(2).all(|w| w[0] < w[1]), "{lens:?}");
    }
}
