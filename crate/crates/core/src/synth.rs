//! Seeded synthetic edge maps for tests and benchmarks.
//!
//! Ground truth is a set of random one-pixel-wide polylines. The matching
//! "prediction" dilates them to three pixels, jitters the confidences and adds
//! sparse low-level background speckle, so that NMS and thinning have real
//! work to do and matching sees realistic candidate densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{BinaryMap, ConfidenceMap, PixelCoord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Prediction / ground-truth pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub pred: ConfidenceMap,
    pub gt: BinaryMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineParams {
    pub polylines: usize,
    pub vertices: usize,
    /// Keep this many pixels clear along every border.
    pub margin: usize,
    /// Amplitude of the uniform jitter added to band confidences.
    pub noise: f64,
    /// Probability that a background pixel gets a speckle.
    pub speckle: f64,
}

impl Default for PolylineParams {
    fn default() -> Self {
        Self {
            polylines: 8,
            vertices: 4,
            margin: 4,
            noise: 0.08,
            speckle: 0.01,
        }
    }
}

/// Pixels of the segment `a -> b` (Bresenham, 8-connected).
pub fn segment(a: PixelCoord, b: PixelCoord) -> Vec<PixelCoord> {
    let (mut x, mut y) = (a.x as isize, a.y as isize);
    let (x1, y1) = (b.x as isize, b.y as isize);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        out.push(PixelCoord::new(x as usize, y as usize));
        if x == x1 && y == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Random polylines with every pixel at least `margin` from the border.
pub fn random_polylines<R: Rng>(
    width: usize,
    height: usize,
    params: &PolylineParams,
    rng: &mut R,
) -> BinaryMap {
    let m = params.margin;
    assert!(
        width > 2 * m && height > 2 * m,
        "map too small for the margin"
    );
    let mut gt = BinaryMap::empty(width, height);
    for _ in 0..params.polylines {
        let mut prev = PixelCoord::new(rng.gen_range(m..width - m), rng.gen_range(m..height - m));
        for _ in 1..params.vertices.max(2) {
            let next = PixelCoord::new(rng.gen_range(m..width - m), rng.gen_range(m..height - m));
            for p in segment(prev, next) {
                gt.set(p.x, p.y, true);
            }
            prev = next;
        }
    }
    gt
}

/// Thick, noisy prediction around `gt`: the 3×3 dilation of the edges, with
/// the centre line stronger than its flanks.
pub fn thick_prediction<R: Rng>(
    gt: &BinaryMap,
    params: &PolylineParams,
    rng: &mut R,
) -> ConfidenceMap {
    let (w, h) = gt.dims();
    let mut values = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = if gt.get(x, y) {
                0.85
            } else if neighbours_edge(gt, x, y) {
                0.55
            } else if rng.gen_bool(params.speckle) {
                rng.gen_range(0.0..0.3)
            } else {
                continue;
            };
            let jitter = if params.noise > 0.0 {
                rng.gen_range(-params.noise..params.noise)
            } else {
                0.0
            };
            values[y * w + x] = (v + jitter).clamp(0.0, 1.0);
        }
    }
    ConfidenceMap::new(w, h, values).expect("values are clamped")
}

fn neighbours_edge(gt: &BinaryMap, x: usize, y: usize) -> bool {
    let (w, h) = gt.dims();
    (y.saturating_sub(1)..=(y + 1).min(h - 1))
        .any(|ny| (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|nx| gt.get(nx, ny)))
}

pub fn polyline_image(
    width: usize,
    height: usize,
    params: &PolylineParams,
    seed: u64,
) -> SynthImage {
    let mut rng = rng(seed);
    let gt = random_polylines(width, height, params, &mut rng);
    let pred = thick_prediction(&gt, params, &mut rng);
    SynthImage { pred, gt }
}

/// `count` images of the given size with consecutive seeds.
pub fn polyline_dataset(
    count: usize,
    width: usize,
    height: usize,
    params: &PolylineParams,
    seed: u64,
) -> Vec<SynthImage> {
    (0..count as u64)
        .map(|i| polyline_image(width, height, params, seed.wrapping_add(i)))
        .collect()
}

/// Scattered random pixels: ground truth with density `gt_density` and
/// predictions with density `pred_density`, confidences uniform in `(0, 1]`.
pub fn scattered_image<R: Rng>(
    width: usize,
    height: usize,
    gt_density: f64,
    pred_density: f64,
    rng: &mut R,
) -> SynthImage {
    let bits = (0..width * height)
        .map(|_| rng.gen_bool(gt_density))
        .collect();
    let gt = BinaryMap::new(width, height, bits).expect("dims match");
    let values = (0..width * height)
        .map(|_| {
            if rng.gen_bool(pred_density) {
                1.0 - rng.gen::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    let pred = ConfidenceMap::new(width, height, values).expect("values in range");
    SynthImage { pred, gt }
}

/// `n` prediction and `n` ground-truth pixels packed into the same
/// `ceil(sqrt(n))`-wide square, so every pair is within the returned
/// distance threshold.
pub fn dense_block(n: usize, seed: u64) -> (SynthImage, usize) {
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    let mut rng = rng(seed);
    let mut slots: Vec<usize> = (0..side * side).collect();
    let mut pick = |rng: &mut ChaCha8Rng| {
        for i in 0..n {
            let j = rng.gen_range(i..slots.len());
            slots.swap(i, j);
        }
        slots[..n].to_vec()
    };
    let gt_slots = pick(&mut rng);
    let pred_slots = pick(&mut rng);
    let mut gt = BinaryMap::empty(side, side);
    for s in gt_slots {
        gt.set(s % side, s / side, true);
    }
    let mut values = vec![0.0; side * side];
    for s in pred_slots {
        values[s] = rng.gen_range(0.05..1.0);
    }
    let pred = ConfidenceMap::new(side, side, values).expect("values in range");
    (SynthImage { pred, gt }, 2 * side)
}

/// `n` short horizontal prediction/GT strokes spread over a wide strip, so
/// the feasible graph has bounded degree.
pub fn sparse_strip(n: usize, seed: u64) -> SynthImage {
    let mut rng = rng(seed);
    let width = 4 * n + 4;
    let height = 5;
    let mut gt = BinaryMap::empty(width, height);
    let mut values = vec![0.0; width * height];
    for i in 0..n {
        let x = 4 * i + 2;
        gt.set(x, 2, true);
        let dy: usize = rng.gen_range(1..=3);
        values[dy * width + x] = rng.gen_range(0.05..1.0);
    }
    let pred = ConfidenceMap::new(width, height, values).expect("values in range");
    SynthImage { pred, gt }
}
