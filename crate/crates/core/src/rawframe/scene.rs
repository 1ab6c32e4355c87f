//! Deterministic synthetic Bayer scenes: flat saturated rectangles over a
//! low-amplitude noise floor, sampled through the CFA. Ground truth is exact
//! by construction, which is what the detector and metric tests lean on.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BayerFrame, BoundingBox, CfaPattern};
use crate::error::{Error, Result};

/// Mean gray level of the scene background.
pub const BACKGROUND_LEVEL: u8 = 96;

/// Object colors; the class id of an object is its index here.
pub const PALETTE: [[u8; 3]; 6] = [
    [220, 40, 40],
    [40, 200, 60],
    [40, 60, 220],
    [220, 210, 40],
    [210, 40, 210],
    [40, 200, 210],
];

pub fn palette_color(class_id: u16) -> [u8; 3] {
    PALETTE[class_id as usize % PALETTE.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    /// Inclusive range of rectangle side lengths in pixels.
    pub min_side: usize,
    pub max_side: usize,
    /// Minimum gap kept between rectangles.
    pub margin: usize,
    /// Background noise amplitude (uniform in `[-noise, noise]`).
    pub noise: u8,
    /// Per-axis speed bound in pixels per frame, used by [`SceneStream`].
    pub max_speed: i32,
    pub placement_retries: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            min_side: 6,
            max_side: 40,
            margin: 16,
            noise: 3,
            max_speed: 2,
            placement_retries: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub frame: BayerFrame,
    pub truth: Vec<BoundingBox>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x: i32,
    y: i32,
    w: i32,
    h: i32,
    class_id: u16,
}

impl Rect {
    fn conflicts(&self, other: &Rect, margin: i32) -> bool {
        self.x < other.x + other.w + margin
            && other.x < self.x + self.w + margin
            && self.y < other.y + other.h + margin
            && other.y < self.y + self.h + margin
    }

    fn to_box(self) -> BoundingBox {
        BoundingBox::truth(self.class_id, self.x as f32, self.y as f32, self.w as f32, self.h as f32)
    }
}

fn noise_seed(seed: u64, frame_index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(frame_index).rotate_left(17)
}

fn check_dims(width: usize, height: usize, params: &SceneParams) -> Result<()> {
    if width < 64 || height < 64 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::Geometry(format!(
            "scene dimensions must be even and at least 64, got {width}x{height}"
        )));
    }
    if params.min_side == 0 || params.min_side > params.max_side {
        return Err(Error::InvalidArgument("object side range is empty".into()));
    }
    if params.max_side > width.min(height) {
        return Err(Error::InvalidArgument("objects do not fit in the frame".into()));
    }
    Ok(())
}

fn place_objects(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    count: usize,
    params: &SceneParams,
) -> Result<Vec<Rect>> {
    let mut classes: Vec<u16> = (0..PALETTE.len() as u16).collect();
    classes.shuffle(rng);
    let mut placed: Vec<Rect> = Vec::with_capacity(count);
    for i in 0..count {
        let class_id = classes[i % classes.len()];
        let mut attempt = 0;
        loop {
            if attempt == params.placement_retries {
                return Err(Error::Placement(format!(
                    "could not place object {} of {count} without overlap",
                    i + 1
                )));
            }
            attempt += 1;
            let w = rng.gen_range(params.min_side..=params.max_side) as i32;
            let h = rng.gen_range(params.min_side..=params.max_side) as i32;
            let x = rng.gen_range(0..=(width as i32 - w));
            let y = rng.gen_range(0..=(height as i32 - h));
            let rect = Rect { x, y, w, h, class_id };
            if placed.iter().all(|r| !r.conflicts(&rect, params.margin as i32)) {
                placed.push(rect);
                break;
            }
        }
    }
    Ok(placed)
}

fn render(
    width: usize,
    height: usize,
    pattern: CfaPattern,
    rects: &[Rect],
    noise: u8,
    seed: u64,
) -> BayerFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = noise as i32;
    let mut pixels: Vec<u8> = (0..width * height)
        .map(|_| (BACKGROUND_LEVEL as i32 + rng.gen_range(-amp..=amp)).clamp(0, 255) as u8)
        .collect();
    for r in rects {
        let color = palette_color(r.class_id);
        for y in r.y as usize..(r.y + r.h) as usize {
            for x in r.x as usize..(r.x + r.w) as usize {
                pixels[y * width + x] = color[pattern.color_at(y, x) as usize];
            }
        }
    }
    BayerFrame::new(width, height, pattern, pixels).expect("dimensions validated by caller")
}

/// Renders a single scene with default parameters.
pub fn generate_scene(
    seed: u64,
    width: usize,
    height: usize,
    object_count: usize,
    pattern: CfaPattern,
) -> Result<SyntheticScene> {
    generate_scene_with(seed, width, height, object_count, pattern, &SceneParams::default())
}

pub fn generate_scene_with(
    seed: u64,
    width: usize,
    height: usize,
    object_count: usize,
    pattern: CfaPattern,
    params: &SceneParams,
) -> Result<SyntheticScene> {
    SceneStream::new(seed, width, height, object_count, pattern, params.clone())
        .map(|mut s| s.next_scene())
}

/// A moving-object video: frame 0 equals [`generate_scene_with`] for the same
/// seed; afterwards each object drifts by at most `max_speed` pixels per axis
/// per frame, bouncing off borders and neighbours.
#[derive(Debug, Clone)]
pub struct SceneStream {
    width: usize,
    height: usize,
    pattern: CfaPattern,
    params: SceneParams,
    seed: u64,
    objects: Vec<(Rect, i32, i32)>,
    index: u64,
}

impl SceneStream {
    pub fn new(
        seed: u64,
        width: usize,
        height: usize,
        object_count: usize,
        pattern: CfaPattern,
        params: SceneParams,
    ) -> Result<Self> {
        check_dims(width, height, &params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rects = place_objects(&mut rng, width, height, object_count, &params)?;
        let speed = params.max_speed.max(0);
        let objects = rects
            .into_iter()
            .map(|r| (r, rng.gen_range(-speed..=speed), rng.gen_range(-speed..=speed)))
            .collect();
        Ok(SceneStream { width, height, pattern, params, seed, objects, index: 0 })
    }

    pub fn frame_index(&self) -> u64 {
        self.index
    }

    /// Renders the current frame and advances object positions.
    pub fn next_scene(&mut self) -> SyntheticScene {
        let rects: Vec<Rect> = self.objects.iter().map(|o| o.0).collect();
        let seed = noise_seed(self.seed, self.index);
        let frame = render(self.width, self.height, self.pattern, &rects, self.params.noise, seed);
        let truth = rects.iter().map(|r| r.to_box()).collect();
        self.step();
        self.index += 1;
        SyntheticScene { frame, truth, seed: self.seed }
    }

    fn step(&mut self) {
        let margin = self.params.margin as i32;
        for i in 0..self.objects.len() {
            let (rect, mut vx, mut vy) = self.objects[i];
            let mut moved = rect;
            for axis in 0..2 {
                let mut candidate = moved;
                if axis == 0 {
                    candidate.x += vx;
                } else {
                    candidate.y += vy;
                }
                let inside = candidate.x >= 0
                    && candidate.y >= 0
                    && candidate.x + candidate.w <= self.width as i32
                    && candidate.y + candidate.h <= self.height as i32;
                let clear = self
                    .objects
                    .iter()
                    .enumerate()
                    .all(|(j, o)| j == i || !o.0.conflicts(&candidate, margin));
                if inside && clear {
                    moved = candidate;
                } else if axis == 0 {
                    vx = -vx;
                } else {
                    vy = -vy;
                }
            }
            self.objects[i] = (moved, vx, vy);
        }
    }
}

impl Iterator for SceneStream {
    type Item = SyntheticScene;

    fn next(&mut self) -> Option<SyntheticScene> {
        Some(self.next_scene())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scene_has_no_truth() {
        let s = generate_scene(1, 128, 96, 0, CfaPattern::Rggb).unwrap();
        assert!(s.truth.is_empty());
        assert!(s.frame.pixels().iter().all(|&p| p.abs_diff(BACKGROUND_LEVEL) <= 3));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scene(9, 256, 128, 4, CfaPattern::Bggr).unwrap();
        let b = generate_scene(9, 256, 128, 4, CfaPattern::Bggr).unwrap();
        let c = generate_scene(10, 256, 128, 4, CfaPattern::Bggr).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.frame, c.frame);
    }

    #[test]
    fn truth_boxes_are_tight_and_disjoint() {
        let s = generate_scene(3, 320, 192, 5, CfaPattern::Rggb).unwrap();
        assert_eq!(s.truth.len(), 5);
        for (i, a) in s.truth.iter().enumerate() {
            let color = palette_color(a.class_id);
            for y in a.y as usize..a.bottom() as usize {
                for x in a.x as usize..a.right() as usize {
                    let expect = color[CfaPattern::Rggb.color_at(y, x) as usize];
                    assert_eq!(s.frame.get(x, y), expect);
                }
            }
            for b in &s.truth[i + 1..] {
                assert_eq!(a.intersection_area(b), 0.0);
            }
        }
    }

    #[test]
    fn impossible_placement_fails() {
        let params = SceneParams { min_side: 60, max_side: 64, ..SceneParams::default() };
        assert!(matches!(
            generate_scene_with(1, 64, 64, 3, CfaPattern::Rggb, &params),
            Err(Error::Placement(_))
        ));
        assert!(generate_scene(1, 62, 64, 1, CfaPattern::Rggb).is_err());
    }

    #[test]
    fn stream_motion_is_bounded() {
        let params = SceneParams { max_speed: 3, ..SceneParams::default() };
        let mut stream = SceneStream::new(5, 256, 192, 4, CfaPattern::Rggb, params).unwrap();
        let first = stream.next_scene();
        assert_eq!(first, generate_scene_with(5, 256, 192, 4, CfaPattern::Rggb, &SceneParams {
            max_speed: 3,
            ..SceneParams::default()
        })
        .unwrap());
        let mut prev = first.truth;
        for _ in 0..50 {
            let s = stream.next_scene();
            for (a, b) in prev.iter().zip(&s.truth) {
                assert!((a.x - b.x).abs() <= 3.0 && (a.y - b.y).abs() <= 3.0);
                assert_eq!((a.w, a.h, a.class_id), (b.w, b.h, b.class_id));
            }
            for (i, a) in s.truth.iter().enumerate() {
                for b in &s.truth[i + 1..] {
                    assert_eq!(a.intersection_area(b), 0.0);
                }
            }
            prev = s.truth;
        }
    }
}
