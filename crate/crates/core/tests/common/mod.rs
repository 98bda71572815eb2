//! Independent oracles and instance generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashSet;

use crisp_match::matching::{build_matched_label, MatchResult};
use crisp_match::{BinaryMap, ConfidenceMap, MatchConfig, PixelCoord};
use rand::Rng;

pub fn px(x: usize, y: usize) -> PixelCoord {
    PixelCoord::new(x, y)
}

fn l1(a: PixelCoord, b: PixelCoord) -> usize {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

/// Pair cost recomputed from scratch, or `None` when the pair is forbidden.
pub fn pair_cost(
    pred: &ConfidenceMap,
    gt: &BinaryMap,
    p: PixelCoord,
    g: PixelCoord,
    cfg: &MatchConfig,
) -> Option<f64> {
    let e = pred.get(p.x, p.y);
    let d = l1(p, g);
    (e >= cfg.tau_c && gt.get(g.x, g.y) && d < cfg.tau_d).then_some(d as f64 - cfg.alpha * e)
}

/// Exhaustive search over all matchings: returns the maximum cardinality and
/// the least total cost attained at that cardinality.
pub fn brute_force(pred: &ConfidenceMap, gt: &BinaryMap, cfg: &MatchConfig) -> (usize, f64) {
    let (w, h) = pred.dims();
    let preds: Vec<PixelCoord> = (0..h)
        .flat_map(|y| (0..w).map(move |x| px(x, y)))
        .filter(|p| pred.get(p.x, p.y) >= cfg.tau_c)
        .collect();
    let gts: Vec<PixelCoord> = (0..h)
        .flat_map(|y| (0..w).map(move |x| px(x, y)))
        .filter(|g| gt.get(g.x, g.y))
        .collect();
    let costs: Vec<Vec<Option<f64>>> = preds
        .iter()
        .map(|&p| {
            gts.iter()
                .map(|&g| pair_cost(pred, gt, p, g, cfg))
                .collect()
        })
        .collect();

    fn go(
        i: usize,
        used: &mut Vec<bool>,
        costs: &[Vec<Option<f64>>],
        card: usize,
        cost: f64,
        best: &mut (usize, f64),
    ) {
        if i == costs.len() {
            if card > best.0 || (card == best.0 && cost < best.1) {
                *best = (card, cost);
            }
            return;
        }
        go(i + 1, used, costs, card, cost, best);
        for j in 0..used.len() {
            if let (false, Some(c)) = (used[j], costs[i][j]) {
                used[j] = true;
                go(i + 1, used, costs, card + 1, cost + c, best);
                used[j] = false;
            }
        }
    }

    let mut best = (0, 0.0);
    go(0, &mut vec![false; gts.len()], &costs, 0, 0.0, &mut best);
    best
}

/// Random instance with at most `max_pred` predictions and `max_gt` ground
/// truth pixels on a small grid.
pub fn tiny_instance<R: Rng>(
    rng: &mut R,
    max_pred: usize,
    max_gt: usize,
) -> (ConfidenceMap, BinaryMap, MatchConfig) {
    let w = rng.gen_range(2..=7);
    let h = rng.gen_range(2..=7);
    let cells = w * h;
    let n_pred = rng.gen_range(0..=max_pred.min(cells));
    let n_gt = rng.gen_range(0..=max_gt.min(cells));
    let tau_c = rng.gen_range(0.01..0.3);
    let mut values = vec![0.0; cells];
    for i in rand::seq::index::sample(rng, cells, n_pred) {
        values[i] = rng.gen_range(tau_c..=1.0);
    }
    let mut bits = vec![false; cells];
    for i in rand::seq::index::sample(rng, cells, n_gt) {
        bits[i] = true;
    }
    let cfg = MatchConfig::new(tau_c, rng.gen_range(1..=6), rng.gen_range(0.0..30.0)).unwrap();
    (
        ConfidenceMap::new(w, h, values).unwrap(),
        BinaryMap::new(w, h, bits).unwrap(),
        cfg,
    )
}

/// Every violated matching invariant, as human-readable strings.
pub fn matching_violations(
    pred: &ConfidenceMap,
    gt: &BinaryMap,
    cfg: &MatchConfig,
    r: &MatchResult,
) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen_p = HashSet::new();
    let mut seen_g = HashSet::new();
    let mut total = 0.0;
    for pair in &r.pairs {
        if !seen_p.insert(pair.pred) {
            out.push(format!("prediction {:?} matched twice", pair.pred));
        }
        if !seen_g.insert(pair.gt) {
            out.push(format!("ground truth {:?} matched twice", pair.gt));
        }
        match pair_cost(pred, gt, pair.pred, pair.gt, cfg) {
            None => out.push(format!("infeasible pair {:?} -> {:?}", pair.pred, pair.gt)),
            Some(c) if (c - pair.cost).abs() > 1e-12 => {
                out.push(format!("pair cost {} but expected {c}", pair.cost))
            }
            Some(_) => {}
        }
        total += pair.cost;
    }
    if (total - r.total_cost).abs() > 1e-9 {
        out.push(format!(
            "total_cost {} but pairs sum to {total}",
            r.total_cost
        ));
    }
    let all_gt: HashSet<PixelCoord> = gt.ones().into_iter().collect();
    let unmatched: HashSet<PixelCoord> = r.unmatched_gt.iter().copied().collect();
    if !seen_g.is_disjoint(&unmatched) {
        out.push("a ground-truth pixel is both matched and unmatched".into());
    }
    if seen_g.union(&unmatched).copied().collect::<HashSet<_>>() != all_gt {
        out.push("matched and unmatched ground truth do not cover the ground truth".into());
    }
    let label = build_matched_label(r, gt).label;
    let expected: HashSet<PixelCoord> = seen_p.union(&unmatched).copied().collect();
    if label.ones().into_iter().collect::<HashSet<_>>() != expected {
        out.push("label differs from matched predictions plus unmatched ground truth".into());
    }
    out
}

/// Prediction/GT pair with random density and confidences.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    w: usize,
    h: usize,
) -> (ConfidenceMap, BinaryMap, MatchConfig) {
    let gt_density = rng.gen_range(0.01..0.15);
    let pred_density = rng.gen_range(0.01..0.25);
    let img = crisp_match::synth::scattered_image(w, h, gt_density, pred_density, rng);
    let cfg = MatchConfig::new(
        rng.gen_range(0.01..0.5),
        rng.gen_range(1..=8),
        rng.gen_range(0.0..30.0),
    )
    .unwrap();
    (img.pred, img.gt, cfg)
}

/// Guo–Hall neighbourhood of `(x, y)`, `p2..p9` clockwise from north, with
/// out-of-bounds pixels read as background.
fn ring(m: &BinaryMap, x: usize, y: usize) -> [bool; 8] {
    let (w, h) = m.dims();
    let at = |dx: isize, dy: isize| {
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        nx >= 0
            && ny >= 0
            && (nx as usize) < w
            && (ny as usize) < h
            && m.get(nx as usize, ny as usize)
    };
    [
        at(0, -1),
        at(1, -1),
        at(1, 0),
        at(1, 1),
        at(0, 1),
        at(-1, 1),
        at(-1, 0),
        at(-1, -1),
    ]
}

/// True when the Guo–Hall sub-iteration `step` (0 or 1) would delete `(x, y)`.
pub fn guo_hall_deletable(m: &BinaryMap, x: usize, y: usize, step: usize) -> bool {
    let [p2, p3, p4, p5, p6, p7, p8, p9] = ring(m, x, y).map(u32::from);
    let c = (1 - p2) & (p3 | p4);
    let c = c + ((1 - p4) & (p5 | p6)) + ((1 - p6) & (p7 | p8)) + ((1 - p8) & (p9 | p2));
    let n1 = (p9 | p2) + (p3 | p4) + (p5 | p6) + (p7 | p8);
    let n2 = (p2 | p3) + (p4 | p5) + (p6 | p7) + (p8 | p9);
    let n = n1.min(n2);
    let m_ = if step == 0 {
        (p6 | p7 | (1 - p9)) & p8
    } else {
        (p2 | p3 | (1 - p5)) & p4
    };
    c == 1 && (2..=3).contains(&n) && m_ == 0
}

/// Pixels of `m` that either sub-iteration would still delete.
pub fn deletable_pixels(m: &BinaryMap) -> Vec<PixelCoord> {
    m.ones()
        .into_iter()
        .filter(|p| guo_hall_deletable(m, p.x, p.y, 0) || guo_hall_deletable(m, p.x, p.y, 1))
        .collect()
}

/// Union of random discs and rectangles.
pub fn random_blob<R: Rng>(rng: &mut R, w: usize, h: usize) -> BinaryMap {
    let mut m = BinaryMap::empty(w, h);
    for _ in 0..rng.gen_range(1..=4) {
        let cx = rng.gen_range(0..w) as isize;
        let cy = rng.gen_range(0..h) as isize;
        if rng.gen_bool(0.5) {
            let r = rng.gen_range(1..=8) as isize;
            for y in 0..h as isize {
                for x in 0..w as isize {
                    if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                        m.set(x as usize, y as usize, true);
                    }
                }
            }
        } else {
            let (rw, rh) = (
                rng.gen_range(1..=12) as isize,
                rng.gen_range(1..=12) as isize,
            );
            for y in cy..(cy + rh).min(h as isize) {
                for x in cx..(cx + rw).min(w as isize) {
                    m.set(x as usize, y as usize, true);
                }
            }
        }
    }
    m
}

/// Prediction mask that zeroes every pixel not kept by `keep`.
pub fn masked(pred: &ConfidenceMap, keep: &BinaryMap) -> ConfidenceMap {
    let values = pred
        .values()
        .iter()
        .zip(keep.bits())
        .map(|(&v, &k)| if k { v } else { 0.0 })
        .collect();
    ConfidenceMap::new(pred.width(), pred.height(), values).unwrap()
}
