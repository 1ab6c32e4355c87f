use crate::rawframe::{BoundingBox, RgbFrame, BACKGROUND_LEVEL, PALETTE};

/// Reference color-blob detector for synthetic scenes.
///
/// Every pixel is labeled with the nearest reference color (background or a
/// palette entry); 4-connected components of a palette label become boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub background: [u8; 3],
    pub palette: Vec<[u8; 3]>,
    /// Pixels farther than this (Euclidean RGB) from every reference color
    /// count as background.
    pub max_distance: f64,
    /// Components with fewer pixels are discarded.
    pub min_area: usize,
}

impl Default for Detector {
    fn default() -> Self {
        Detector {
            background: [BACKGROUND_LEVEL; 3],
            palette: PALETTE.to_vec(),
            max_distance: 100.0,
            min_area: 6,
        }
    }
}

const UNLABELED: u8 = u8::MAX;

impl Detector {
    fn label(&self, px: [u8; 3]) -> u8 {
        let dist2 = |c: &[u8; 3]| -> i32 {
            (0..3).map(|i| (px[i] as i32 - c[i] as i32).pow(2)).sum()
        };
        let mut best = (dist2(&self.background), UNLABELED);
        for (i, c) in self.palette.iter().enumerate() {
            let d = dist2(c);
            if d < best.0 {
                best = (d, i as u8);
            }
        }
        if (best.0 as f64) > self.max_distance * self.max_distance {
            UNLABELED
        } else {
            best.1
        }
    }

    /// Boxes with confidence at least `conf_threshold`, in raster order of
    /// their first pixel. Confidence is the share of labeled pixels in the box.
    pub fn detect(&self, frame: &RgbFrame, conf_threshold: f32) -> Vec<BoundingBox> {
        let (w, h) = (frame.width(), frame.height());
        let labels: Vec<u8> = frame.data().chunks_exact(3).map(|p| self.label([p[0], p[1], p[2]])).collect();
        let mut seen = vec![false; w * h];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        for start in 0..w * h {
            let class = labels[start];
            if class == UNLABELED || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            let mut area = 0usize;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                area += 1;
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
                let mut visit = |j: usize| {
                    if !seen[j] && labels[j] == class {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            if area < self.min_area {
                continue;
            }
            let (bw, bh) = ((x1 - x0 + 1) as f32, (y1 - y0 + 1) as f32);
            let confidence = area as f32 / (bw * bh);
            if confidence >= conf_threshold {
                out.push(BoundingBox { class_id: class as u16, x: x0 as f32, y: y0 as f32, w: bw, h: bh, confidence });
            }
        }
        out
    }
}

/// [`Detector::detect`] with the default detector.
pub fn detect(frame: &RgbFrame, conf_threshold: f32) -> Vec<BoundingBox> {
    Detector::default().detect(frame, conf_threshold)
}

/// Intersection over union; 0 when both boxes are empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
