//! Confidence-weighted one-to-one matching between a predicted edge map and a
//! ground-truth edge map, and the supervision label derived from it.
//!
//! A prediction pixel `p` and a ground-truth pixel `g` may be paired when
//! `E(p) >= tau_c`, `G(g) = 1` and `|p - g|_1 < tau_d`; the pair costs
//! `|p - g|_1 - alpha * E(p)`. All other pairs are forbidden. The optimum is
//! the least-cost matching among those of maximum cardinality.

mod solver;

pub use solver::{min_cost_max_matching, Edge, Matching};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::raster::{self, manhattan, BinaryMap, ConfidenceMap, PixelCoord, Tileable};

/// Feasibility thresholds and confidence weight of the matching cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Minimum confidence for a prediction pixel to take part.
    pub tau_c: f64,
    /// Pairs must be strictly closer than this (Manhattan, pixels).
    pub tau_d: usize,
    /// Weight of the prediction confidence in the cost.
    pub alpha: f64,
}

impl Default for MatchConfig {
    /// PiDiNet settings on BSDS.
    fn default() -> Self {
        Self {
            tau_c: 0.01,
            tau_d: 4,
            alpha: 25.0,
        }
    }
}

impl MatchConfig {
    pub fn new(tau_c: f64, tau_d: usize, alpha: f64) -> Result<Self> {
        let cfg = Self {
            tau_c,
            tau_d,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_c > 0.0 && self.tau_c <= 1.0) {
            return Err(Error::invalid(format!(
                "tau_c must lie in (0, 1], got {}",
                self.tau_c
            )));
        }
        if self.tau_d < 1 {
            return Err(Error::invalid("tau_d must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A feasible (prediction, ground truth) pair and its cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEdge {
    pub pred: PixelCoord,
    pub gt: PixelCoord,
    pub cost: f64,
}

/// Optimal pairing plus the pixels left over on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Matched pairs ordered row-major by prediction pixel.
    pub pairs: Vec<CandidateEdge>,
    pub unmatched_gt: Vec<PixelCoord>,
    pub unmatched_pred: Vec<PixelCoord>,
    pub total_cost: f64,
}

impl MatchResult {
    pub fn cardinality(&self) -> usize {
        self.pairs.len()
    }
}

/// Binary supervision target: matched prediction positions plus unmatched
/// ground-truth positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatchedLabel {
    pub label: BinaryMap,
}

impl MatchedLabel {
    pub fn into_inner(self) -> BinaryMap {
        self.label
    }
}

/// Lists every feasible pair, row-major by prediction pixel and then by
/// ground-truth pixel.
///
/// Only the diamond `|dx| + |dy| < tau_d` around each prediction pixel is
/// scanned, so the work is `O(N_pred * tau_d^2)` rather than quadratic in the
/// image size.
pub fn build_candidates(
    pred: &ConfidenceMap,
    gt: &BinaryMap,
    cfg: &MatchConfig,
) -> Result<Vec<CandidateEdge>> {
    cfg.validate()?;
    if pred.dims() != gt.dims() {
        return Err(Error::invalid(format!(
            "prediction is {:?} but ground truth is {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let (w, h) = pred.dims();
    let reach = cfg.tau_d - 1;
    let mut out = Vec::new();
    for py in 0..h {
        for px in 0..w {
            let conf = pred.get(px, py);
            if conf < cfg.tau_c {
                continue;
            }
            let p = PixelCoord::new(px, py);
            for gy in py.saturating_sub(reach)..=(py + reach).min(h - 1) {
                let rest = reach - gy.abs_diff(py);
                for gx in px.saturating_sub(rest)..=(px + rest).min(w - 1) {
                    if !gt.get(gx, gy) {
                        continue;
                    }
                    let g = PixelCoord::new(gx, gy);
                    let d = manhattan(p, g);
                    out.push(CandidateEdge {
                        pred: p,
                        gt: g,
                        cost: d as f64 - cfg.alpha * conf,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn index_of(pixels: &[PixelCoord]) -> HashMap<PixelCoord, usize> {
    pixels.iter().enumerate().map(|(i, &p)| (p, i)).collect()
}

/// Minimum-cost maximum-cardinality matching over the candidate pairs.
///
/// Pixel lists may be given in any order; they are deduplicated and sorted
/// row-major so the result depends only on the sets involved.
///
/// # Panics
/// If a candidate references a pixel missing from `gt_pixels` or
/// `pred_pixels`.
pub fn solve_assignment(
    candidates: &[CandidateEdge],
    gt_pixels: &[PixelCoord],
    pred_pixels: &[PixelCoord],
) -> MatchResult {
    let mut preds = pred_pixels.to_vec();
    preds.sort_unstable();
    preds.dedup();
    let mut gts = gt_pixels.to_vec();
    gts.sort_unstable();
    gts.dedup();

    let pred_idx = index_of(&preds);
    let gt_idx = index_of(&gts);
    let edges: Vec<Edge> = candidates
        .iter()
        .map(|c| Edge {
            left: *pred_idx
                .get(&c.pred)
                .unwrap_or_else(|| panic!("candidate prediction {:?} not in pixel list", c.pred)),
            right: *gt_idx
                .get(&c.gt)
                .unwrap_or_else(|| panic!("candidate ground truth {:?} not in pixel list", c.gt)),
            cost: c.cost,
        })
        .collect();

    let matching = min_cost_max_matching(preds.len(), gts.len(), &edges);

    // Cheapest parallel edge per matched pair (the solver may have used any).
    let mut best: HashMap<(usize, usize), f64> = HashMap::new();
    for e in &edges {
        best.entry((e.left, e.right))
            .and_modify(|c| *c = c.min(e.cost))
            .or_insert(e.cost);
    }

    let pairs: Vec<CandidateEdge> = matching
        .pairs()
        .map(|(l, r)| CandidateEdge {
            pred: preds[l],
            gt: gts[r],
            cost: best[&(l, r)],
        })
        .collect();
    let total_cost = pairs.iter().map(|p| p.cost).sum();
    let unmatched_pred = preds
        .iter()
        .zip(&matching.left_to_right)
        .filter(|(_, m)| m.is_none())
        .map(|(&p, _)| p)
        .collect();
    let unmatched_gt = gts
        .iter()
        .zip(&matching.right_to_left)
        .filter(|(_, m)| m.is_none())
        .map(|(&g, _)| g)
        .collect();

    MatchResult {
        pairs,
        unmatched_gt,
        unmatched_pred,
        total_cost,
    }
}

/// Ones at every matched prediction pixel and every unmatched ground-truth
/// pixel.
pub fn build_matched_label(result: &MatchResult, gt: &BinaryMap) -> MatchedLabel {
    let mut label = BinaryMap::empty(gt.width(), gt.height());
    for pair in &result.pairs {
        label.set(pair.pred.x, pair.pred.y, true);
    }
    for g in &result.unmatched_gt {
        label.set(g.x, g.y, true);
    }
    MatchedLabel { label }
}

/// Builds candidates and solves the assignment for one (prediction, ground
/// truth) pair without tiling.
pub fn match_maps(pred: &ConfidenceMap, gt: &BinaryMap, cfg: &MatchConfig) -> Result<MatchResult> {
    let candidates = build_candidates(pred, gt, cfg)?;
    let preds: Vec<PixelCoord> = pred
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= cfg.tau_c)
        .map(|(i, _)| PixelCoord::new(i % pred.width(), i / pred.width()))
        .collect();
    Ok(solve_assignment(&candidates, &gt.ones(), &preds))
}

/// Full label generation. With `tiling = Some((rows, cols))` each tile is
/// matched on its own and the tile labels are stitched back together.
pub fn generate_supervision(
    pred: &ConfidenceMap,
    gt: &BinaryMap,
    cfg: &MatchConfig,
    tiling: Option<(usize, usize)>,
) -> Result<MatchedLabel> {
    Ok(generate_supervision_with_cost(pred, gt, cfg, tiling)?.0)
}

/// Like [`generate_supervision`], also returning the summed matching cost over
/// all tiles.
pub fn generate_supervision_with_cost(
    pred: &ConfidenceMap,
    gt: &BinaryMap,
    cfg: &MatchConfig,
    tiling: Option<(usize, usize)>,
) -> Result<(MatchedLabel, f64)> {
    cfg.validate()?;
    if pred.dims() != gt.dims() {
        return Err(Error::invalid(format!(
            "prediction is {:?} but ground truth is {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let Some((rows, cols)) = tiling else {
        let result = match_maps(pred, gt, cfg)?;
        return Ok((build_matched_label(&result, gt), result.total_cost));
    };

    let (layout, pred_tiles) = raster::tile(pred, rows, cols)?;
    let mut labels = Vec::with_capacity(pred_tiles.len());
    let mut total = 0.0;
    for (rect, pred_tile) in layout.tiles().iter().zip(&pred_tiles) {
        let gt_tile = gt.crop(*rect);
        let result = match_maps(pred_tile, &gt_tile, cfg)?;
        total += result.total_cost;
        labels.push(build_matched_label(&result, &gt_tile).label);
    }
    let label = raster::merge(&layout, &labels)?;
    Ok((MatchedLabel { label }, total))
}
