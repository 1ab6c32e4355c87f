use super::{BayerFrame, Color, RgbFrame};

/// Bilinear demosaic: each missing channel is the rounded mean of the
/// same-color samples in the 3x3 neighborhood. At frame borders only in-bounds
/// neighbors contribute, which equals parity-preserving border replication.
pub fn demosaic_bilinear(frame: &BayerFrame) -> RgbFrame {
    let (w, h) = (frame.width(), frame.height());
    let pattern = frame.pattern();
    let px = frame.pixels();
    let mut data = vec![0u8; w * h * 3];

    for y in 0..h {
        for x in 0..w {
            let own = pattern.color_at(y, x);
            let mut sum = [0u32; 3];
            let mut count = [0u32; 3];
            let y0 = y.saturating_sub(1);
            let x0 = x.saturating_sub(1);
            for ny in y0..=(y + 1).min(h - 1) {
                for nx in x0..=(x + 1).min(w - 1) {
                    if ny == y && nx == x {
                        continue;
                    }
                    let c = pattern.color_at(ny, nx) as usize;
                    sum[c] += px[ny * w + nx] as u32;
                    count[c] += 1;
                }
            }
            let out = &mut data[(y * w + x) * 3..(y * w + x) * 3 + 3];
            for c in [Color::Red, Color::Green, Color::Blue] {
                let ci = c as usize;
                out[ci] = if c == own {
                    px[y * w + x]
                } else {
                    ((sum[ci] + count[ci] / 2) / count[ci]) as u8
                };
            }
        }
    }
    RgbFrame { width: w, height: h, data }
}
