//! Bayer RAW frames: the capture unit, its CFA channel planes, and the
//! auxiliary image types used on the render and evaluation paths.

mod demosaic;
mod io;
mod scene;
mod sharpness;

pub use demosaic::demosaic_bilinear;
pub use io::{parse_boxes, read_raw, write_boxes, write_raw, RAW_HEADER_LEN, RAW_MAGIC};
pub use scene::{
    generate_scene, generate_scene_with, palette_color, SceneParams, SceneStream, SyntheticScene,
    BACKGROUND_LEVEL, PALETTE,
};
pub use sharpness::tenengrad;

use crate::error::{Error, Result};

/// Color of a single CFA site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    Red = 0,
    Green = 1,
    Blue = 2,
}

/// Ordering of the 2x2 repeating filter cell, read in raster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CfaPattern {
    #[default]
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

impl CfaPattern {
    pub const ALL: [CfaPattern; 4] =
        [CfaPattern::Rggb, CfaPattern::Bggr, CfaPattern::Grbg, CfaPattern::Gbrg];

    /// Colors of the four sites (0,0), (0,1), (1,0), (1,1).
    pub fn sites(self) -> [Color; 4] {
        use Color::*;
        match self {
            CfaPattern::Rggb => [Red, Green, Green, Blue],
            CfaPattern::Bggr => [Blue, Green, Green, Red],
            CfaPattern::Grbg => [Green, Red, Blue, Green],
            CfaPattern::Gbrg => [Green, Blue, Red, Green],
        }
    }

    #[inline]
    pub fn color_at(self, row: usize, col: usize) -> Color {
        self.sites()[(row & 1) * 2 + (col & 1)]
    }

    pub fn code(self) -> u8 {
        match self {
            CfaPattern::Rggb => 0,
            CfaPattern::Bggr => 1,
            CfaPattern::Grbg => 2,
            CfaPattern::Gbrg => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::format("CFA pattern", format!("unknown code {code}")))
    }
}

impl std::str::FromStr for CfaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(CfaPattern::Rggb),
            "BGGR" => Ok(CfaPattern::Bggr),
            "GRBG" => Ok(CfaPattern::Grbg),
            "GBRG" => Ok(CfaPattern::Gbrg),
            other => Err(Error::InvalidArgument(format!("unknown CFA pattern {other:?}"))),
        }
    }
}

/// Single-channel 8-bit CFA mosaic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BayerFrame {
    width: usize,
    height: usize,
    pattern: CfaPattern,
    pixels: Vec<u8>,
}

impl BayerFrame {
    pub fn new(width: usize, height: usize, pattern: CfaPattern, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(Error::Geometry(format!(
                "Bayer frame must have positive even dimensions, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::mismatch(width * height, pixels.len()));
        }
        Ok(BayerFrame { width, height, pattern, pixels })
    }

    pub fn filled(width: usize, height: usize, pattern: CfaPattern, value: u8) -> Result<Self> {
        Self::new(width, height, pattern, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pattern(&self) -> CfaPattern {
        self.pattern
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Copies out a sub-rectangle. Offsets must be even so the sub-frame keeps
    /// the parent's CFA phase.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<BayerFrame> {
        if !x.is_multiple_of(2) || !y.is_multiple_of(2) {
            return Err(Error::Geometry(format!("crop origin ({x},{y}) is not CFA aligned")));
        }
        if x + w > self.width || y + h > self.height {
            return Err(Error::Geometry(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            out.extend_from_slice(&self.pixels[start..start + w]);
        }
        BayerFrame::new(w, h, self.pattern, out)
    }

    /// Writes the `(src_x, src_y, w, h)` region of `src` into `self` at `(dst_x, dst_y)`.
    pub fn blit(
        &mut self,
        src: &BayerFrame,
        (src_x, src_y): (usize, usize),
        (dst_x, dst_y): (usize, usize),
        (w, h): (usize, usize),
    ) -> Result<()> {
        if src_x + w > src.width || src_y + h > src.height {
            return Err(Error::Geometry("blit source region out of bounds".into()));
        }
        if dst_x + w > self.width || dst_y + h > self.height {
            return Err(Error::Geometry("blit destination region out of bounds".into()));
        }
        for row in 0..h {
            let s = (src_y + row) * src.width + src_x;
            let d = (dst_y + row) * self.width + dst_x;
            self.pixels[d..d + w].copy_from_slice(&src.pixels[s..s + w]);
        }
        Ok(())
    }
}

/// The four CFA-site planes of a Bayer frame, in raster order of the 2x2 cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanarFrame {
    width: usize,
    height: usize,
    planes: [Vec<u8>; 4],
}

impl PlanarFrame {
    pub fn new(width: usize, height: usize, planes: [Vec<u8>; 4]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry("planar frame must be non-empty".into()));
        }
        if let Some(p) = planes.iter().find(|p| p.len() != width * height) {
            return Err(Error::mismatch(width * height, p.len()));
        }
        Ok(PlanarFrame { width, height, planes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &[Vec<u8>; 4] {
        &self.planes
    }

    pub fn plane(&self, site: usize) -> &[u8] {
        &self.planes[site]
    }
}

/// Splits a mosaic into its four CFA-site planes.
pub fn disassemble(frame: &BayerFrame) -> PlanarFrame {
    let (pw, ph) = (frame.width / 2, frame.height / 2);
    let mut planes: [Vec<u8>; 4] = std::array::from_fn(|_| Vec::with_capacity(pw * ph));
    for i in 0..ph {
        let even = &frame.pixels[(2 * i) * frame.width..(2 * i + 1) * frame.width];
        let odd = &frame.pixels[(2 * i + 1) * frame.width..(2 * i + 2) * frame.width];
        for j in 0..pw {
            planes[0].push(even[2 * j]);
            planes[1].push(even[2 * j + 1]);
            planes[2].push(odd[2 * j]);
            planes[3].push(odd[2 * j + 1]);
        }
    }
    PlanarFrame { width: pw, height: ph, planes }
}

/// Interleaves four CFA-site planes back into a mosaic.
pub fn reassemble(planar: &PlanarFrame, pattern: CfaPattern) -> BayerFrame {
    let (w, h) = (planar.width * 2, planar.height * 2);
    let mut pixels = vec![0u8; w * h];
    for i in 0..planar.height {
        for j in 0..planar.width {
            let k = i * planar.width + j;
            let base = 2 * i * w + 2 * j;
            pixels[base] = planar.planes[0][k];
            pixels[base + 1] = planar.planes[1][k];
            pixels[base + w] = planar.planes[2][k];
            pixels[base + w + 1] = planar.planes[3][k];
        }
    }
    BayerFrame { width: w, height: h, pattern, pixels }
}

/// Scales every sample by `factor` in (0, 1], flooring the result.
pub fn scale_luminosity(frame: &BayerFrame, factor: f64) -> Result<BayerFrame> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "luminosity factor must lie in (0, 1], got {factor}"
        )));
    }
    let pixels =
        frame.pixels.iter().map(|&p| (p as f64 * factor).floor().clamp(0.0, 255.0) as u8).collect();
    Ok(BayerFrame { pixels, ..frame.clone() })
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::mismatch(width * height * 3, data.len()));
        }
        Ok(RgbFrame { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Axis-aligned box in pixel coordinates. Ground truth carries confidence 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub class_id: u16,
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
    pub confidence: f32,
}

impl BoundingBox {
    pub fn truth(class_id: u16, x: f32, y: f32, w: f32, h: f32) -> Self {
        BoundingBox { class_id, x, y, w, h, confidence: 1.0 }
    }

    pub fn right(&self) -> f32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f32 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) as f64 * self.h.max(0.0) as f64
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.x.max(other.x)) as f64;
        let ih = (self.bottom().min(other.bottom()) - self.y.max(other.y)) as f64;
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Clips the box to a `width` x `height` frame; `None` if nothing with
    /// positive area remains.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width as f32);
        let y1 = self.bottom().min(height as f32);
        (x1 > x0 && y1 > y0).then_some(BoundingBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0, ..*self })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disassemble_maps_sites_to_planes() {
        let f = BayerFrame::new(2, 2, CfaPattern::Rggb, vec![10, 20, 30, 40]).unwrap();
        let p = disassemble(&f);
        assert_eq!((p.width(), p.height()), (1, 1));
        assert_eq!(p.planes(), &[vec![10], vec![20], vec![30], vec![40]]);
        assert_eq!(reassemble(&p, CfaPattern::Rggb), f);
    }

    #[test]
    fn full_resolution_shapes() {
        let f = BayerFrame::filled(3072, 2048, CfaPattern::Rggb, 7).unwrap();
        let p = disassemble(&f);
        assert_eq!((p.width(), p.height()), (1536, 1024));
        let back = reassemble(&p, CfaPattern::Rggb);
        assert_eq!((back.width(), back.height()), (3072, 2048));
    }

    #[test]
    fn exhaustive_small_roundtrip() {
        // Every 2x2 frame with samples drawn from a small alphabet.
        for code in 0..(4u32.pow(4)) {
            let px: Vec<u8> = (0..4).map(|k| ((code >> (2 * k)) & 3) as u8 * 60).collect();
            for pattern in CfaPattern::ALL {
                let f = BayerFrame::new(2, 2, pattern, px.clone()).unwrap();
                assert_eq!(reassemble(&disassemble(&f), pattern), f);
            }
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(BayerFrame::new(3, 2, CfaPattern::Rggb, vec![0; 6]).is_err());
        assert!(BayerFrame::new(0, 2, CfaPattern::Rggb, vec![]).is_err());
        assert!(BayerFrame::new(2, 2, CfaPattern::Rggb, vec![0; 3]).is_err());
    }

    #[test]
    fn luminosity_examples() {
        let f = BayerFrame::new(2, 2, CfaPattern::Rggb, vec![200, 255, 1, 0]).unwrap();
        assert_eq!(scale_luminosity(&f, 1.0).unwrap(), f);
        assert_eq!(scale_luminosity(&f, 0.5).unwrap().pixels(), &[100, 127, 0, 0]);
        assert_eq!(scale_luminosity(&f, 0.25).unwrap().pixels()[1], 63);
        assert!(scale_luminosity(&f, 0.0).is_err());
        assert!(scale_luminosity(&f, 1.5).is_err());
        assert!(scale_luminosity(&f, f64::NAN).is_err());
    }

    #[test]
    fn pattern_codes_roundtrip() {
        for p in CfaPattern::ALL {
            assert_eq!(CfaPattern::from_code(p.code()).unwrap(), p);
        }
        assert!(CfaPattern::from_code(9).is_err());
        assert_eq!("grbg".parse::<CfaPattern>().unwrap(), CfaPattern::Grbg);
    }

    #[test]
    fn box_clamping() {
        let b = BoundingBox::truth(0, -5.0, 10.0, 20.0, 100.0);
        let c = b.clamp_to(64, 64).unwrap();
        assert_eq!((c.x, c.y, c.w, c.h), (0.0, 10.0, 15.0, 54.0));
        assert!(BoundingBox::truth(0, 70.0, 0.0, 5.0, 5.0).clamp_to(64, 64).is_none());
    }

    proptest! {
        #[test]
        fn roundtrip_identity(w in 1usize..24, h in 1usize..24, seed in any::<u64>(), code in 0u8..4) {
            let (w, h) = (w * 2, h * 2);
            let px: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let pattern = CfaPattern::from_code(code).unwrap();
            let f = BayerFrame::new(w, h, pattern, px).unwrap();
            let planar = disassemble(&f);
            let mut all: Vec<u8> = planar.planes().iter().flatten().copied().collect();
            let mut orig = f.pixels().to_vec();
            all.sort_unstable();
            orig.sort_unstable();
            prop_assert_eq!(all, orig);
            prop_assert_eq!(reassemble(&planar, pattern), f);
        }

        #[test]
        fn luminosity_is_non_increasing(v in any::<u8>(), factor in 0.001f64..=1.0) {
            let f = BayerFrame::new(2, 2, CfaPattern::Rggb, vec![v; 4]).unwrap();
            let s = scale_luminosity(&f, factor).unwrap();
            prop_assert!(s.pixels().iter().all(|&p| p <= v));
        }
    }
}
