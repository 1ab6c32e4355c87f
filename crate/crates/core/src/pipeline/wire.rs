//! Byte layouts of the client/server messages. All integers and floats are
//! little-endian.
//!
//! Frame message:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `ABFM` |
//! | 4  | 1 | version |
//! | 5  | 8 | frame id |
//! | 13 | 1 | flags (bit 0: key frame) |
//! | 14 | 1 | config id |
//! | 15 | 4 | quantization lo (f32) |
//! | 19 | 4 | quantization hi (f32) |
//! | 23 | 4 | frame width |
//! | 27 | 4 | frame height |
//! | 31 | 1 | CFA pattern code |
//! | 32 | 1 | grid rows |
//! | 33 | 1 | grid columns |
//! | 34 | 2 | tile overlap |
//! | 36 | 2 | tile count |
//! | 38 | … | tile records |
//!
//! Result message: magic `ABRM`, version u8, frame id u64, status u8,
//! count u32, then per detection class u16, confidence f32, x, y, w, h f32.

use crate::codec::{CodecConfig, EncodedTile, QuantParams, TileGrid};
use crate::error::{Error, Result};
use crate::rawframe::{BoundingBox, CfaPattern};

pub const FRAME_MAGIC: &[u8; 4] = b"ABFM";
pub const RESULT_MAGIC: &[u8; 4] = b"ABRM";
pub const WIRE_VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 38;
pub const RESULT_HEADER_LEN: usize = 18;
pub const DETECTION_RECORD_LEN: usize = 22;

const FLAG_KEY: u8 = 1;

/// Frame dimensions and tiling, carried so the server needs no side channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    pub pattern: CfaPattern,
    pub rows: u8,
    pub cols: u8,
    pub overlap: u16,
}

impl FrameGeometry {
    pub fn from_grid(grid: &TileGrid, pattern: CfaPattern) -> Result<Self> {
        let narrow = |v: usize, what: &str, max: usize| {
            if v > max {
                Err(Error::InvalidArgument(format!("{what} {v} does not fit the wire format")))
            } else {
                Ok(v)
            }
        };
        Ok(FrameGeometry {
            width: narrow(grid.frame_width(), "frame width", u32::MAX as usize)? as u32,
            height: narrow(grid.frame_height(), "frame height", u32::MAX as usize)? as u32,
            pattern,
            rows: narrow(grid.rows(), "grid rows", u8::MAX as usize)? as u8,
            cols: narrow(grid.cols(), "grid columns", u8::MAX as usize)? as u8,
            overlap: narrow(grid.overlap(), "overlap", u16::MAX as usize)? as u16,
        })
    }

    pub fn grid(&self) -> Result<TileGrid> {
        TileGrid::new(
            self.width as usize,
            self.height as usize,
            self.rows as usize,
            self.cols as usize,
            self.overlap as usize,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMessage {
    pub frame_id: u64,
    pub key_frame: bool,
    pub config: CodecConfig,
    pub quant: QuantParams,
    pub geometry: FrameGeometry,
    pub tiles: Vec<EncodedTile>,
}

impl FrameMessage {
    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.tiles.iter().map(EncodedTile::wire_len).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let count = u16::try_from(self.tiles.len())
            .map_err(|_| Error::InvalidArgument("too many tiles for one message".into()))?;
        let g = &self.geometry;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(FRAME_MAGIC);
        out.push(WIRE_VERSION);
        out.extend_from_slice(&self.frame_id.to_le_bytes());
        out.push(if self.key_frame { FLAG_KEY } else { 0 });
        out.push(self.config.id());
        out.extend_from_slice(&self.quant.lo().to_le_bytes());
        out.extend_from_slice(&self.quant.hi().to_le_bytes());
        out.extend_from_slice(&g.width.to_le_bytes());
        out.extend_from_slice(&g.height.to_le_bytes());
        out.push(g.pattern.code());
        out.push(g.rows);
        out.push(g.cols);
        out.extend_from_slice(&g.overlap.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        for t in &self.tiles {
            t.write_to(&mut out);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, "frame message");
        r.magic(FRAME_MAGIC)?;
        let frame_id = r.u64()?;
        let flags = r.u8()?;
        let config = CodecConfig::from_id(r.u8()?).map_err(|e| Error::Protocol(e.to_string()))?;
        let (lo, hi) = (r.f32()?, r.f32()?);
        let quant = QuantParams::new(lo, hi).map_err(|e| Error::Protocol(e.to_string()))?;
        let width = r.u32()?;
        let height = r.u32()?;
        let pattern = CfaPattern::from_code(r.u8()?).map_err(|e| Error::Protocol(e.to_string()))?;
        let geometry = FrameGeometry { width, height, pattern, rows: r.u8()?, cols: r.u8()?, overlap: r.u16()? };
        let count = r.u16()? as usize;
        let mut pos = FRAME_HEADER_LEN;
        let mut tiles = Vec::with_capacity(count);
        for _ in 0..count {
            tiles.push(EncodedTile::read_from(buf, &mut pos)?);
        }
        if pos != buf.len() {
            return Err(Error::Protocol(format!("{} trailing bytes after {count} tiles", buf.len() - pos)));
        }
        Ok(FrameMessage { frame_id, key_frame: flags & FLAG_KEY != 0, config, quant, geometry, tiles })
    }
}

/// Reads the frame id of a message whose header survived, for error replies.
pub fn peek_frame_id(buf: &[u8]) -> Option<u64> {
    (buf.len() >= 13 && &buf[..4] == FRAME_MAGIC).then(|| u64::from_le_bytes(buf[5..13].try_into().unwrap()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultStatus {
    Ok = 0,
    /// The frame could not be parsed or decoded; detections are empty.
    Error = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultMessage {
    pub frame_id: u64,
    pub status: ResultStatus,
    pub detections: Vec<BoundingBox>,
}

impl ResultMessage {
    pub fn encoded_len(&self) -> usize {
        RESULT_HEADER_LEN + DETECTION_RECORD_LEN * self.detections.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(RESULT_MAGIC);
        out.push(WIRE_VERSION);
        out.extend_from_slice(&self.frame_id.to_le_bytes());
        out.push(self.status as u8);
        out.extend_from_slice(&(self.detections.len() as u32).to_le_bytes());
        for d in &self.detections {
            out.extend_from_slice(&d.class_id.to_le_bytes());
            for v in [d.confidence, d.x, d.y, d.w, d.h] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, "result message");
        r.magic(RESULT_MAGIC)?;
        let frame_id = r.u64()?;
        let status = match r.u8()? {
            0 => ResultStatus::Ok,
            1 => ResultStatus::Error,
            s => return Err(Error::Protocol(format!("unknown result status {s}"))),
        };
        let count = r.u32()? as usize;
        if buf.len() != RESULT_HEADER_LEN + count.saturating_mul(DETECTION_RECORD_LEN) {
            return Err(Error::Protocol(format!(
                "result message of {} bytes cannot hold {count} detections",
                buf.len()
            )));
        }
        let mut detections = Vec::with_capacity(count);
        for _ in 0..count {
            let class_id = r.u16()?;
            let confidence = r.f32()?;
            detections.push(BoundingBox { class_id, confidence, x: r.f32()?, y: r.f32()?, w: r.f32()?, h: r.f32()? });
        }
        Ok(ResultMessage { frame_id, status, detections })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let bytes = self
            .buf
            .get(self.pos..self.pos + N)
            .ok_or_else(|| Error::Protocol(format!("truncated {}", self.what)))?;
        self.pos += N;
        Ok(bytes.try_into().unwrap())
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if &self.take::<4>()? != magic {
            return Err(Error::Protocol(format!("bad {} magic", self.what)));
        }
        let v = self.u8()?;
        if v != WIRE_VERSION {
            return Err(Error::Protocol(format!("unsupported {} version {v}", self.what)));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
}
