use crate::error::{Error, Result};
use crate::rawframe::{BayerFrame, CfaPattern};

/// Overlap in pixels added on each interior tile edge.
pub const DEFAULT_OVERLAP: usize = 32;

/// Canvas value for tiles that were not transmitted.
pub const DEFAULT_FILL: u8 = 114;

/// Pixel rectangle of one tile: the encoded extent and the core it owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub core_x: usize,
    pub core_y: usize,
    pub core_w: usize,
    pub core_h: usize,
}

/// An `rows x cols` grid whose disjoint cores cover the frame, each tile
/// extended by `overlap` pixels across every interior edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    frame_width: usize,
    frame_height: usize,
    rows: usize,
    cols: usize,
    overlap: usize,
}

impl TileGrid {
    pub fn new(
        frame_width: usize,
        frame_height: usize,
        rows: usize,
        cols: usize,
        overlap: usize,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Geometry("tile grid needs at least one row and column".into()));
        }
        if rows * cols > 256 {
            return Err(Error::Geometry("tile indexes must fit in one byte".into()));
        }
        if !overlap.is_multiple_of(2) {
            return Err(Error::Geometry(format!("overlap {overlap} must be even")));
        }
        if !frame_width.is_multiple_of(cols) || !frame_height.is_multiple_of(rows) {
            return Err(Error::Geometry(format!(
                "{frame_width}x{frame_height} does not split evenly into {rows}x{cols}"
            )));
        }
        let (cw, ch) = (frame_width / cols, frame_height / rows);
        if cw % 2 != 0 || ch % 2 != 0 {
            return Err(Error::Geometry(format!("tile core {cw}x{ch} has odd dimensions")));
        }
        if cw < 2 * overlap || ch < 2 * overlap {
            return Err(Error::Geometry(format!(
                "tile core {cw}x{ch} is smaller than twice the overlap {overlap}"
            )));
        }
        Ok(TileGrid { frame_width, frame_height, rows, cols, overlap })
    }

    /// The default 4-row, 3-column layout.
    pub fn standard(frame_width: usize, frame_height: usize) -> Result<Self> {
        Self::new(frame_width, frame_height, 4, 3, DEFAULT_OVERLAP)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn frame_width(&self) -> usize {
        self.frame_width
    }

    pub fn frame_height(&self) -> usize {
        self.frame_height
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn rect(&self, index: usize) -> Result<TileRect> {
        if index >= self.tile_count() {
            return Err(Error::InvalidArgument(format!(
                "tile index {index} out of range for {} tiles",
                self.tile_count()
            )));
        }
        let (row, col) = (index / self.cols, index % self.cols);
        let (cw, ch) = (self.frame_width / self.cols, self.frame_height / self.rows);
        let (core_x, core_y) = (col * cw, row * ch);
        let left = if col > 0 { self.overlap } else { 0 };
        let right = if col + 1 < self.cols { self.overlap } else { 0 };
        let top = if row > 0 { self.overlap } else { 0 };
        let bottom = if row + 1 < self.rows { self.overlap } else { 0 };
        Ok(TileRect {
            x: core_x - left,
            y: core_y - top,
            w: cw + left + right,
            h: ch + top + bottom,
            core_x,
            core_y,
            core_w: cw,
            core_h: ch,
        })
    }

    pub fn rects(&self) -> Vec<TileRect> {
        (0..self.tile_count()).map(|i| self.rect(i).expect("index in range")).collect()
    }
}

/// Cuts a frame into its tiles, in row-major index order.
pub fn partition(frame: &BayerFrame, grid: &TileGrid) -> Result<Vec<BayerFrame>> {
    check_frame(frame, grid)?;
    grid.rects().iter().map(|r| frame.crop(r.x, r.y, r.w, r.h)).collect()
}

pub(crate) fn check_frame(frame: &BayerFrame, grid: &TileGrid) -> Result<()> {
    if frame.width() != grid.frame_width || frame.height() != grid.frame_height {
        return Err(Error::mismatch(
            format!("{}x{}", grid.frame_width, grid.frame_height),
            format!("{}x{}", frame.width(), frame.height()),
        ));
    }
    Ok(())
}

/// Pastes the core of each decoded tile onto a canvas filled with `fill`.
pub fn assemble_canvas(
    tiles: &[(usize, BayerFrame)],
    grid: &TileGrid,
    pattern: CfaPattern,
    fill: u8,
) -> Result<BayerFrame> {
    let mut canvas = BayerFrame::filled(grid.frame_width, grid.frame_height, pattern, fill)?;
    let mut seen = vec![false; grid.tile_count()];
    for (index, tile) in tiles {
        let r = grid.rect(*index)?;
        if std::mem::replace(&mut seen[*index], true) {
            return Err(Error::InvalidArgument(format!("tile index {index} supplied twice")));
        }
        if tile.width() != r.w || tile.height() != r.h {
            return Err(Error::mismatch(
                format!("{}x{}", r.w, r.h),
                format!("{}x{}", tile.width(), tile.height()),
            ));
        }
        canvas.blit(
            tile,
            (r.core_x - r.x, r.core_y - r.y),
            (r.core_x, r.core_y),
            (r.core_w, r.core_h),
        )?;
    }
    Ok(canvas)
}
