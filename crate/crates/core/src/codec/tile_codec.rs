use super::network::{decode, encode, FeatureMap};
use super::quant::{calibrate, dequantize, quantize, QuantParams};
use super::tiles::{assemble_canvas, check_frame, TileGrid};
use super::{entropy_decode, entropy_encode, CodecConfig, CodecWeights};
use crate::error::{Error, Result};
use crate::par::{self, Strategy};
use crate::rawframe::{BayerFrame, CfaPattern};

/// Bytes before the payload in a tile record.
pub const TILE_RECORD_HEADER_LEN: usize = 18;

/// One compressed tile as it travels on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTile {
    pub tile_index: u8,
    pub config_id: u8,
    pub quant: QuantParams,
    /// Quantized byte count before entropy coding.
    pub raw_len: u32,
    pub payload: Vec<u8>,
}

impl EncodedTile {
    pub fn wire_len(&self) -> usize {
        TILE_RECORD_HEADER_LEN + self.payload.len()
    }

    /// `tile_index u8 | config_id u8 | lo f32 | hi f32 | raw_len u32 | payload_len u32 | payload`.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.push(self.tile_index);
        out.push(self.config_id);
        out.extend_from_slice(&self.quant.lo().to_le_bytes());
        out.extend_from_slice(&self.quant.hi().to_le_bytes());
        out.extend_from_slice(&self.raw_len.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses one record starting at `*pos`, advancing it past the record.
    pub fn read_from(buf: &[u8], pos: &mut usize) -> Result<Self> {
        let rest = buf.get(*pos..).unwrap_or_default();
        if rest.len() < TILE_RECORD_HEADER_LEN {
            return Err(Error::Protocol("truncated tile record header".into()));
        }
        let f32_at = |i: usize| f32::from_le_bytes(rest[i..i + 4].try_into().unwrap());
        let u32_at = |i: usize| u32::from_le_bytes(rest[i..i + 4].try_into().unwrap());
        let payload_len = u32_at(14) as usize;
        let end = TILE_RECORD_HEADER_LEN
            .checked_add(payload_len)
            .filter(|&e| e <= rest.len())
            .ok_or_else(|| Error::Protocol("tile payload runs past the message".into()))?;
        let quant = QuantParams::new(f32_at(2), f32_at(6))
            .map_err(|e| Error::Protocol(format!("tile quantization range: {e}")))?;
        let tile = EncodedTile {
            tile_index: rest[0],
            config_id: rest[1],
            quant,
            raw_len: u32_at(10),
            payload: rest[TILE_RECORD_HEADER_LEN..end].to_vec(),
        };
        *pos += end;
        Ok(tile)
    }
}

/// encode -> quantize -> entropy code.
pub fn encode_tile_full(
    tile: &BayerFrame,
    tile_index: usize,
    config: CodecConfig,
    weights: &CodecWeights,
    quant: QuantParams,
) -> Result<EncodedTile> {
    let feat = encode(tile, config, &weights.encoder)?;
    Ok(pack(&feat, tile_index, config, quant))
}

fn pack(feat: &FeatureMap, tile_index: usize, config: CodecConfig, quant: QuantParams) -> EncodedTile {
    let bytes = quantize(feat, quant);
    EncodedTile {
        tile_index: tile_index as u8,
        config_id: config.id(),
        quant,
        raw_len: bytes.len() as u32,
        payload: entropy_encode(&bytes),
    }
}

/// Inverse of [`encode_tile_full`]; tile geometry comes from the grid.
pub fn decode_tile_full(
    tile: &EncodedTile,
    grid: &TileGrid,
    pattern: CfaPattern,
    weights: &CodecWeights,
) -> Result<BayerFrame> {
    let config = CodecConfig::from_id(tile.config_id)?;
    let rect = grid.rect(tile.tile_index as usize)?;
    let dims = config.feature_dims(rect.w, rect.h)?;
    if tile.raw_len as usize != dims.0 * dims.1 * dims.2 {
        return Err(Error::mismatch(dims.0 * dims.1 * dims.2, tile.raw_len));
    }
    let bytes = entropy_decode(&tile.payload, tile.raw_len as usize)?;
    let feat = dequantize(&bytes, tile.quant, dims)?;
    decode(&feat, config, &weights.decoder, pattern)
}

/// The selected tiles of one frame, sharing a configuration and quantization range.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub config: CodecConfig,
    pub quant: QuantParams,
    pub tiles: Vec<EncodedTile>,
}

/// Encodes the listed tiles of `frame`, calibrating one range over all of them.
pub fn encode_frame(
    frame: &BayerFrame,
    grid: &TileGrid,
    tile_indexes: &[usize],
    config: CodecConfig,
    weights: &CodecWeights,
    strategy: Strategy,
) -> Result<EncodedFrame> {
    check_frame(frame, grid)?;
    let mut seen = vec![false; grid.tile_count()];
    for &i in tile_indexes {
        grid.rect(i)?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("tile index {i} selected twice")));
        }
    }
    let feats = par::try_map(strategy, tile_indexes, |&i| {
        let r = grid.rect(i)?;
        encode(&frame.crop(r.x, r.y, r.w, r.h)?, config, &weights.encoder)
    })?;
    let quant = if feats.is_empty() {
        QuantParams::default()
    } else {
        calibrate(feats.iter().flat_map(|f| f.data.iter().copied()))?
    };
    let jobs: Vec<(usize, &FeatureMap)> = tile_indexes.iter().copied().zip(&feats).collect();
    let tiles = par::map(strategy, &jobs, |&(i, f)| pack(f, i, config, quant));
    Ok(EncodedFrame { config, quant, tiles })
}

/// Decodes tiles and pastes them onto a `fill` canvas.
pub fn decode_frame(
    tiles: &[EncodedTile],
    grid: &TileGrid,
    pattern: CfaPattern,
    weights: &CodecWeights,
    fill: u8,
    strategy: Strategy,
) -> Result<BayerFrame> {
    let decoded = par::try_map(strategy, tiles, |t| {
        decode_tile_full(t, grid, pattern, weights).map(|f| (t.tile_index as usize, f))
    })?;
    assemble_canvas(&decoded, grid, pattern, fill)
}
