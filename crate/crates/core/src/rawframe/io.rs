use std::io::{Read, Write};

use super::{BayerFrame, BoundingBox, CfaPattern};
use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"ABRW";
pub const RAW_HEADER_LEN: usize = 16;
const RAW_VERSION: u8 = 1;

/// Writes a frame as a 16-byte header followed by the raw samples.
pub fn write_raw<W: Write>(mut out: W, frame: &BayerFrame) -> Result<()> {
    let mut header = [0u8; RAW_HEADER_LEN];
    header[..4].copy_from_slice(RAW_MAGIC);
    header[4] = RAW_VERSION;
    header[5] = frame.pattern().code();
    header[6..10].copy_from_slice(&(frame.width() as u32).to_le_bytes());
    header[10..14].copy_from_slice(&(frame.height() as u32).to_le_bytes());
    out.write_all(&header)?;
    out.write_all(frame.pixels())?;
    Ok(())
}

pub fn read_raw<R: Read>(mut input: R) -> Result<BayerFrame> {
    let mut header = [0u8; RAW_HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[..4] != RAW_MAGIC {
        return Err(Error::format("RAW file", "bad magic"));
    }
    if header[4] != RAW_VERSION {
        return Err(Error::format("RAW file", format!("unsupported version {}", header[4])));
    }
    let pattern = CfaPattern::from_code(header[5])?;
    let width = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
    let mut pixels = vec![0u8; width.checked_mul(height).ok_or_else(|| {
        Error::format("RAW file", "dimensions overflow")
    })?];
    input.read_exact(&mut pixels)?;
    BayerFrame::new(width, height, pattern, pixels)
}

/// Writes boxes as `class x y w h` lines.
pub fn write_boxes<W: Write>(mut out: W, boxes: &[BoundingBox]) -> Result<()> {
    for b in boxes {
        writeln!(out, "{} {} {} {} {}", b.class_id, b.x, b.y, b.w, b.h)?;
    }
    Ok(())
}

/// Parses `class x y w h` lines; blank lines and `#` comments are skipped.
pub fn parse_boxes(text: &str) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::format("box list", format!("line {}: expected 5 fields", lineno + 1)));
        }
        let bad = |_| Error::format("box list", format!("line {}: bad number", lineno + 1));
        let class_id: u16 = fields[0].parse().map_err(|_| bad(()))?;
        let v: Vec<f32> =
            fields[1..].iter().map(|s| s.parse::<f32>().map_err(|_| bad(()))).collect::<Result<_>>()?;
        boxes.push(BoundingBox::truth(class_id, v[0], v[1], v[2], v[3]));
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_header_layout() {
        let f = BayerFrame::new(4, 2, CfaPattern::Gbrg, (0..8).collect()).unwrap();
        let mut buf = Vec::new();
        write_raw(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 16 + 8);
        assert_eq!(&buf[..4], b"ABRW");
        assert_eq!(buf[5], 3);
        assert_eq!(&buf[6..10], &4u32.to_le_bytes());
        assert_eq!(&buf[10..14], &2u32.to_le_bytes());
        assert_eq!(read_raw(&buf[..]).unwrap(), f);
    }

    #[test]
    fn raw_rejects_garbage() {
        assert!(read_raw(&b"XXXX\x01\x00\x02\0\0\0\x02\0\0\0\0\0"[..]).is_err());
        let f = BayerFrame::filled(2, 2, CfaPattern::Rggb, 1).unwrap();
        let mut buf = Vec::new();
        write_raw(&mut buf, &f).unwrap();
        assert!(read_raw(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn sidecar_roundtrip() {
        let boxes = vec![BoundingBox::truth(2, 10.0, 12.0, 30.0, 8.0)];
        let mut buf = Vec::new();
        write_boxes(&mut buf, &boxes).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "2 10 12 30 8\n");
        assert_eq!(parse_boxes(std::str::from_utf8(&buf).unwrap()).unwrap(), boxes);
        assert!(parse_boxes("1 2 3").is_err());
    }
}
