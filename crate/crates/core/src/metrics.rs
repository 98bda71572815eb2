//! Boundary-map evaluation: tolerance-based one-to-one correspondence,
//! precision/recall over a threshold sweep, ODS / OIS / AP and average
//! crispness, under either the post-processed (SEval) or raw (CEval)
//! protocol.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{min_cost_max_matching, Edge};
use crate::postprocess::{nms, nms_survivors, thin, NmsConfig};
use crate::raster::{euclidean, manhattan, threshold, BinaryMap, ConfidenceMap, PixelCoord};

/// Number of thresholds in the standard sweep `{0.00, 0.01, ..., 0.99}`.
pub const THRESHOLD_COUNT: usize = 100;

/// The sweep `{0, 1/n, ..., (n-1)/n}`.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Euclidean,
    Manhattan,
}

impl DistanceMode {
    fn distance(self, a: PixelCoord, b: PixelCoord) -> f64 {
        match self {
            DistanceMode::Euclidean => euclidean(a, b),
            DistanceMode::Manhattan => manhattan(a, b) as f64,
        }
    }
}

impl FromStr for DistanceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Self::Euclidean),
            "manhattan" => Ok(Self::Manhattan),
            other => Err(Error::invalid(format!("unknown distance mode '{other}'"))),
        }
    }
}

/// SEval post-processes every thresholded map; CEval thresholds the raw map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    SEval,
    CEval,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::SEval => "seval",
            Protocol::CEval => "ceval",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "seval" => Ok(Self::SEval),
            "ceval" => Ok(Self::CEval),
            other => Err(Error::invalid(format!("unknown protocol '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondenceCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl CorrespondenceCounts {
    /// `tp / (tp + fp)`, 1 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, 1 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

impl std::ops::Add for CorrespondenceCounts {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One-to-one correspondence between predicted edge pixels and each
/// annotation, crediting pairs strictly closer than `tolerance`.
///
/// A prediction is a true positive if it is matched in at least one
/// annotation; false negatives are summed over annotations.
pub fn correspond(
    pred: &BinaryMap,
    gts: &[BinaryMap],
    tolerance: f64,
    mode: DistanceMode,
) -> Result<CorrespondenceCounts> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::invalid(format!(
            "tolerance must be positive and finite, got {tolerance}"
        )));
    }
    if let Some(g) = gts.iter().find(|g| g.dims() != pred.dims()) {
        return Err(Error::invalid(format!(
            "prediction is {:?} but an annotation is {:?}",
            pred.dims(),
            g.dims()
        )));
    }

    let preds = pred.ones();
    let (w, h) = pred.dims();
    let reach = tolerance.ceil() as usize;
    let mut credited = vec![false; preds.len()];
    let mut missed = 0;

    for gt in gts {
        let gt_pixels = gt.ones();
        let gt_index = |p: PixelCoord| gt_pixels.binary_search(&p).ok();
        let mut edges = Vec::new();
        for (i, &p) in preds.iter().enumerate() {
            for gy in p.y.saturating_sub(reach)..=(p.y + reach).min(h - 1) {
                for gx in p.x.saturating_sub(reach)..=(p.x + reach).min(w - 1) {
                    if !gt.get(gx, gy) {
                        continue;
                    }
                    let g = PixelCoord::new(gx, gy);
                    let d = mode.distance(p, g);
                    if d < tolerance {
                        let j = gt_index(g).expect("set pixel is listed");
                        edges.push(Edge {
                            left: i,
                            right: j,
                            cost: d,
                        });
                    }
                }
            }
        }
        let matching = min_cost_max_matching(preds.len(), gt_pixels.len(), &edges);
        for (i, m) in matching.left_to_right.iter().enumerate() {
            credited[i] |= m.is_some();
        }
        missed += gt_pixels.len() - matching.cardinality();
    }

    let tp = credited.iter().filter(|&&c| c).count();
    Ok(CorrespondenceCounts {
        tp,
        fp: preds.len() - tp,
        fn_: missed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub counts: CorrespondenceCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrPoint {
    pub fn new(threshold: f64, counts: CorrespondenceCounts) -> Self {
        Self {
            threshold,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
        }
    }
}

/// Precision/recall at each threshold of a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn from_counts(thresholds: &[f64], counts: &[CorrespondenceCounts]) -> Self {
        debug_assert_eq!(thresholds.len(), counts.len());
        Self {
            points: thresholds
                .iter()
                .zip(counts)
                .map(|(&t, &c)| PrPoint::new(t, c))
                .collect(),
        }
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.threshold).collect()
    }

    pub fn best_f1(&self) -> f64 {
        self.points.iter().map(|p| p.f1).fold(0.0, f64::max)
    }

    /// Trapezoidal area under precision as a function of recall. Points are
    /// sorted by recall; equal recalls keep their highest precision.
    pub fn average_precision(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .map(|p| (p.recall, p.precision))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        pts.dedup_by(|next, kept| next.0 == kept.0);
        pts.windows(2)
            .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
            .sum()
    }
}

/// Evaluation settings shared by every image of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub nms: NmsConfig,
    pub tolerance: f64,
    pub distance: DistanceMode,
    pub thresholds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::SEval,
            nms: NmsConfig::default(),
            tolerance: 4.0,
            distance: DistanceMode::Euclidean,
            thresholds: THRESHOLD_COUNT,
        }
    }
}

/// One prediction with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalImage {
    pub id: String,
    pub pred: ConfidenceMap,
    pub gts: Vec<BinaryMap>,
}

/// Counts of one image at every threshold of the grid.
pub fn image_counts(
    pred: &ConfidenceMap,
    gts: &[BinaryMap],
    cfg: &EvalConfig,
) -> Result<Vec<CorrespondenceCounts>> {
    if gts.is_empty() {
        return Err(Error::invalid("an image needs at least one annotation"));
    }
    let source = match cfg.protocol {
        Protocol::SEval => nms(pred, &cfg.nms)?,
        Protocol::CEval => pred.clone(),
    };
    threshold_grid(cfg.thresholds)
        .into_iter()
        .map(|t| {
            let bin = threshold(&source, t)?;
            let bin = match cfg.protocol {
                Protocol::SEval => thin(&bin),
                Protocol::CEval => bin,
            };
            correspond(&bin, gts, cfg.tolerance, cfg.distance)
        })
        .collect()
}

/// Dataset curve (counts summed over images) and per-image curves.
pub fn pr_curve(
    dataset: &[(ConfidenceMap, Vec<BinaryMap>)],
    cfg: &EvalConfig,
) -> Result<(PrCurve, Vec<PrCurve>)> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if cfg.thresholds == 0 {
        return Err(Error::invalid("threshold grid is empty"));
    }
    let grid = threshold_grid(cfg.thresholds);
    let per_image: Vec<Vec<CorrespondenceCounts>> = dataset
        .par_iter()
        .map(|(pred, gts)| image_counts(pred, gts, cfg))
        .collect::<Result<_>>()?;

    let mut totals = vec![CorrespondenceCounts::default(); grid.len()];
    for counts in &per_image {
        for (acc, c) in totals.iter_mut().zip(counts) {
            *acc = *acc + *c;
        }
    }
    let curves = per_image
        .iter()
        .map(|c| PrCurve::from_counts(&grid, c))
        .collect();
    Ok((PrCurve::from_counts(&grid, &totals), curves))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSummary {
    pub id: String,
    pub best_f1: f64,
    pub ac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ods: f64,
    pub ois: f64,
    pub ap: f64,
    pub ac: f64,
    pub protocol: Protocol,
    pub tolerance: f64,
    pub dataset_curve: PrCurve,
    pub images: Vec<ImageSummary>,
}

impl EvalReport {
    pub fn thresholds(&self) -> Vec<f64> {
        self.dataset_curve.thresholds()
    }
}

/// ODS, OIS and AP from the curves. Protocol and tolerance default to
/// SEval / 0 and image ids to their positions; [`evaluate`] fills them in.
pub fn summarize(dataset_curve: &PrCurve, per_image: &[PrCurve], ac: f64) -> Result<EvalReport> {
    let grid = dataset_curve.thresholds();
    if per_image.iter().any(|c| c.thresholds() != grid) {
        return Err(Error::invalid(
            "per-image curves use a different threshold grid",
        ));
    }
    if per_image.is_empty() {
        return Err(Error::invalid("no per-image curves"));
    }
    let ois = per_image.iter().map(PrCurve::best_f1).sum::<f64>() / per_image.len() as f64;
    Ok(EvalReport {
        ods: dataset_curve.best_f1(),
        ois,
        ap: dataset_curve.average_precision(),
        ac,
        protocol: Protocol::SEval,
        tolerance: 0.0,
        dataset_curve: dataset_curve.clone(),
        images: per_image
            .iter()
            .enumerate()
            .map(|(i, c)| ImageSummary {
                id: i.to_string(),
                best_f1: c.best_f1(),
                ac: None,
            })
            .collect(),
    })
}

/// Confidence mass kept by crisping: `sum(E * keep) / sum(E)`, where `keep`
/// marks pixels that survive NMS and then thinning. An all-zero map scores 1.
pub fn average_crispness(pred: &ConfidenceMap, cfg: &NmsConfig) -> Result<f64> {
    let total = pred.sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let keep = thin(&nms_survivors(pred, cfg)?);
    let kept: f64 = pred
        .values()
        .iter()
        .zip(keep.bits())
        .filter(|(_, &k)| k)
        .map(|(v, _)| v)
        .sum();
    Ok((kept / total).clamp(0.0, 1.0))
}

/// Full evaluation of a dataset: curves, summary scores and mean AC.
pub fn evaluate(dataset: &[EvalImage], cfg: &EvalConfig) -> Result<EvalReport> {
    let pairs: Vec<(ConfidenceMap, Vec<BinaryMap>)> = dataset
        .iter()
        .map(|img| (img.pred.clone(), img.gts.clone()))
        .collect();
    let (curve, per_image) = pr_curve(&pairs, cfg)?;
    let acs: Vec<f64> = dataset
        .par_iter()
        .map(|img| average_crispness(&img.pred, &cfg.nms))
        .collect::<Result<_>>()?;
    let mean_ac = acs.iter().sum::<f64>() / acs.len() as f64;
    let mut report = summarize(&curve, &per_image, mean_ac)?;
    report.protocol = cfg.protocol;
    report.tolerance = cfg.tolerance;
    for ((summary, img), ac) in report.images.iter_mut().zip(dataset).zip(acs) {
        summary.id = img.id.clone();
        summary.ac = Some(ac);
    }
    Ok(report)
}
