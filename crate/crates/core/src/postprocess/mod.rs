//! Hand-crafted crisping baseline: non-maximum suppression along the edge
//! normal followed by Guo–Hall thinning of a thresholded map.

mod thin;

pub use thin::{is_thin, thin};

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::raster::{threshold, BinaryMap, ConfidenceMap};

/// Suppression radius `r`, border fade `s` and magnitude multiplier `e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig {
    pub r: usize,
    pub s: usize,
    pub e: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            r: 1,
            s: 5,
            e: 1.01,
        }
    }
}

impl NmsConfig {
    pub fn new(r: usize, s: usize, e: f64) -> Result<Self> {
        let cfg = Self { r, s, e };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::invalid("NMS radius r must be at least 1"));
        }
        if !(self.e >= 1.0 && self.e.is_finite()) {
            return Err(Error::invalid(format!(
                "NMS multiplier e must be finite and >= 1, got {}",
                self.e
            )));
        }
        Ok(())
    }
}

/// Normalised 5-tap Gaussian, sigma = 1.
fn gaussian5() -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *w = (-0.5 * d * d).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|w| w / sum)
}

/// Separable 5×5 Gaussian, renormalised over in-bounds taps.
fn smooth(values: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian5();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (t, &kw) in k.iter().enumerate() {
                    let (sx, sy) = if horizontal {
                        (x as isize + t as isize - 2, y as isize)
                    } else {
                        (x as isize, y as isize + t as isize - 2)
                    };
                    if sx < 0 || sy < 0 || sx as usize >= w || sy as usize >= h {
                        continue;
                    }
                    acc += kw * src[sy as usize * w + sx as usize];
                    norm += kw;
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    let tmp = pass(values, true);
    pass(&tmp, false)
}

/// Central differences inside, one-sided at the borders; zero along an axis
/// of length 1.
fn gradient(values: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |x: usize, y: usize| values[y * w + x];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            gx[y * w + x] = if w == 1 {
                0.0
            } else if x == 0 {
                at(1, y) - at(0, y)
            } else if x == w - 1 {
                at(x, y) - at(x - 1, y)
            } else {
                0.5 * (at(x + 1, y) - at(x - 1, y))
            };
            gy[y * w + x] = if h == 1 {
                0.0
            } else if y == 0 {
                at(x, 1) - at(x, 0)
            } else if y == h - 1 {
                at(x, y) - at(x, y - 1)
            } else {
                0.5 * (at(x, y + 1) - at(x, y - 1))
            };
        }
    }
    (gx, gy)
}

/// Per-pixel angle of the edge normal, in radians.
///
/// The normal is the principal direction of most negative curvature of the
/// smoothed map, i.e. the direction across a ridge. Second derivatives come
/// from applying the central-difference gradient twice.
pub fn normal_orientation(map: &ConfidenceMap) -> Vec<f64> {
    let (w, h) = map.dims();
    if h == 1 && w > 1 {
        return vec![FRAC_PI_2; w];
    }
    if w == 1 {
        return vec![0.0; h];
    }
    let s = smooth(map.values(), w, h);
    let (ox, oy) = gradient(&s, w, h);
    let (oxx, _) = gradient(&ox, w, h);
    let (oxy, oyy) = gradient(&oy, w, h);
    (0..w * h)
        .map(|i| 0.5 * (-2.0 * oxy[i]).atan2(oyy[i] - oxx[i]))
        .collect()
}

/// Bilinear sample; taps outside the map read as 0.
fn sample(map: &ConfidenceMap, x: f64, y: f64) -> f64 {
    let (w, h) = map.dims();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let tap = |xi: f64, yi: f64| {
        if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
            0.0
        } else {
            map.get(xi as usize, yi as usize)
        }
    };
    let top = tap(x0, y0) * (1.0 - fx) + tap(x0 + 1.0, y0) * fx;
    let bottom = tap(x0, y0 + 1.0) * (1.0 - fx) + tap(x0 + 1.0, y0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Border fade factor `min(1, d / s)` with `d` the distance to the nearest
/// map edge.
fn fade(x: usize, y: usize, w: usize, h: usize, s: usize) -> f64 {
    if s == 0 {
        return 1.0;
    }
    let d = x.min(y).min(w - 1 - x).min(h - 1 - y);
    (d as f64 / s as f64).min(1.0)
}

/// Non-maximum suppression along the edge normal.
///
/// A pixel survives when `e * E(p)` is at least the bilinearly interpolated
/// value at `p ± k·n` for every `k` in `1..=r`. Survivors are multiplied by
/// the border fade; everything else becomes 0.
pub fn nms(map: &ConfidenceMap, cfg: &NmsConfig) -> Result<ConfidenceMap> {
    cfg.validate()?;
    let (w, h) = map.dims();
    let theta = normal_orientation(map);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = map.get(x, y);
            if v <= 0.0 {
                continue;
            }
            let (sin, cos) = theta[y * w + x].sin_cos();
            let boosted = cfg.e * v;
            let survives = (1..=cfg.r).all(|k| {
                let k = k as f64;
                [1.0, -1.0].iter().all(|sign| {
                    let sx = x as f64 + sign * k * cos;
                    let sy = y as f64 + sign * k * sin;
                    boosted >= sample(map, sx, sy)
                })
            });
            if survives {
                out[y * w + x] = v * fade(x, y, w, h, cfg.s);
            }
        }
    }
    Ok(ConfidenceMap::from_raw(w, h, out))
}

/// Pixels with a nonzero NMS response.
pub fn nms_survivors(map: &ConfidenceMap, cfg: &NmsConfig) -> Result<BinaryMap> {
    let suppressed = nms(map, cfg)?;
    let (w, h) = suppressed.dims();
    BinaryMap::new(w, h, suppressed.values().iter().map(|&v| v > 0.0).collect())
}

/// NMS, then thresholding at `t`, then thinning: one SEval preparation.
pub fn standard_postprocess(map: &ConfidenceMap, cfg: &NmsConfig, t: f64) -> Result<BinaryMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("threshold {t} is outside [0, 1]")));
    }
    let suppressed = nms(map, cfg)?;
    Ok(thin(&threshold(&suppressed, t)?))
}
