use crate::error::{Error, Result};

/// Sobel-Tenengrad focus measure: the sum over interior pixels of
/// `Gx^2 + Gy^2`. Accumulated in integers, so the value is exact.
pub fn tenengrad(data: &[u8], width: usize, height: usize) -> Result<f64> {
    if width < 3 || height < 3 {
        return Err(Error::Geometry(format!("tenengrad needs at least 3x3, got {width}x{height}")));
    }
    if data.len() != width * height {
        return Err(Error::mismatch(width * height, data.len()));
    }
    let p = |x: usize, y: usize| data[y * width + x] as i64;
    let mut total: u64 = 0;
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            let gx = (p(x + 1, y - 1) + 2 * p(x + 1, y) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2 * p(x - 1, y) + p(x - 1, y + 1));
            let gy = (p(x - 1, y + 1) + 2 * p(x, y + 1) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2 * p(x, y - 1) + p(x + 1, y - 1));
            total += (gx * gx + gy * gy) as u64;
        }
    }
    Ok(total as f64)
}
