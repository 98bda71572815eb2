//! Timing harness for the assignment solver and for label generation versus
//! the NMS + per-threshold thinning baseline.
//!
//! Every scenario is repeated at least three times and reported by its
//! median. Each repetition also folds its outputs into a checksum that is
//! compared against an untimed reference run.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{build_candidates, generate_supervision, solve_assignment, MatchConfig};
use crate::metrics::{threshold_grid, THRESHOLD_COUNT};
use crate::postprocess::{nms, thin, NmsConfig};
use crate::raster::{threshold, PixelCoord};
use crate::synth::{dense_block, sparse_strip, SynthImage};

pub const MIN_REPETITIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub scenario: String,
    /// Instance size parameters, e.g. `[("n", 400)]`.
    pub params: Vec<(String, usize)>,
    /// Median wall time over the repetitions, seconds.
    pub median_secs: f64,
    pub min_secs: f64,
    pub max_secs: f64,
    pub repetitions: usize,
    pub checksum: u64,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Times `run` `repetitions` times. Each run must return the same checksum
/// as `reference`.
fn measure(
    scenario: &str,
    params: Vec<(String, usize)>,
    repetitions: usize,
    reference: u64,
    mut run: impl FnMut() -> Result<u64>,
) -> Result<BenchRecord> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::invalid(format!(
            "at least {MIN_REPETITIONS} repetitions are required, got {repetitions}"
        )));
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let checksum = run()?;
        samples.push(start.elapsed().as_secs_f64());
        if checksum != reference {
            return Err(Error::Validation(format!(
                "{scenario}: timed output checksum {checksum:#x} differs from reference {reference:#x}"
            )));
        }
    }
    let min_secs = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max_secs = samples.iter().copied().fold(0.0, f64::max);
    let median_secs = median(&mut samples);
    log_spread(scenario, median_secs, min_secs, max_secs);
    Ok(BenchRecord {
        scenario: scenario.to_string(),
        params,
        median_secs,
        min_secs,
        max_secs,
        repetitions,
        checksum: reference,
    })
}

fn log_spread(scenario: &str, median: f64, min: f64, max: f64) {
    if std::env::var_os("CRISP_MATCH_BENCH_LOG").is_some() {
        eprintln!("{scenario}: median {median:.6}s, range [{min:.6}, {max:.6}]s");
    }
}

fn hash_of<T: Hash>(value: &T) -> u64 {
    let mut h = DefaultHasher::new();
    value.hash(&mut h);
    h.finish()
}

/// Least-squares slope of `ln t` against `ln n`; `None` with fewer than two
/// distinct sizes.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, t)| *n > 0.0 && *t > 0.0)
        .map(|(n, t)| (n.ln(), t.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub records: Vec<BenchRecord>,
    /// Fitted exponent of solve time in the matched-set size.
    pub slope: Option<f64>,
}

/// Prepared solver input: candidates and both pixel lists.
struct SolverInstance {
    candidates: Vec<crate::matching::CandidateEdge>,
    gts: Vec<PixelCoord>,
    preds: Vec<PixelCoord>,
}

impl SolverInstance {
    fn from_image(img: &SynthImage, cfg: &MatchConfig) -> Result<Self> {
        let candidates = build_candidates(&img.pred, &img.gt, cfg)?;
        let w = img.pred.width();
        let preds = img
            .pred
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= cfg.tau_c)
            .map(|(i, _)| PixelCoord::new(i % w, i / w))
            .collect();
        Ok(Self {
            candidates,
            gts: img.gt.ones(),
            preds,
        })
    }

    fn solve_checksum(&self) -> u64 {
        let r = solve_assignment(&self.candidates, &self.gts, &self.preds);
        hash_of(&(r.cardinality(), r.total_cost.to_bits()))
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::invalid("sizes must be non-empty and positive"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes must be strictly increasing"));
    }
    Ok(())
}

/// Solve time on instances where all `n` predictions and `n` ground-truth
/// pixels are mutually feasible.
pub fn scaling_bench(sizes: &[usize], trials: usize) -> Result<ScalingReport> {
    check_sizes(sizes)?;
    let mut records = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let (img, tau_d) = dense_block(n, n as u64);
        let cfg = MatchConfig::new(0.01, tau_d, 1.0)?;
        let inst = SolverInstance::from_image(&img, &cfg)?;
        debug_assert_eq!(inst.candidates.len(), n * n);
        let reference = inst.solve_checksum();
        records.push(measure(
            "solve_assignment/dense",
            vec![("n".into(), n)],
            trials,
            reference,
            || Ok(inst.solve_checksum()),
        )?);
    }
    let slope = log_log_slope(&points(&records));
    Ok(ScalingReport { records, slope })
}

/// Same as [`scaling_bench`] on bounded-degree instances.
pub fn sparse_scaling_bench(sizes: &[usize], trials: usize) -> Result<ScalingReport> {
    check_sizes(sizes)?;
    let cfg = MatchConfig::new(0.01, 4, 1.0)?;
    let mut records = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let img = sparse_strip(n, n as u64);
        let inst = SolverInstance::from_image(&img, &cfg)?;
        let reference = inst.solve_checksum();
        records.push(measure(
            "solve_assignment/sparse",
            vec![("n".into(), n)],
            trials,
            reference,
            || Ok(inst.solve_checksum()),
        )?);
    }
    let slope = log_log_slope(&points(&records));
    Ok(ScalingReport { records, slope })
}

fn points(records: &[BenchRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| (r.params[0].1 as f64, r.median_secs))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub repetitions: usize,
    /// Spread images over the rayon pool instead of running one worker.
    pub parallel: bool,
    pub tiling: Option<(usize, usize)>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            repetitions: MIN_REPETITIONS,
            parallel: false,
            tiling: None,
        }
    }
}

fn over_images<F>(dataset: &[SynthImage], parallel: bool, f: F) -> Result<u64>
where
    F: Fn(&SynthImage) -> Result<u64> + Sync + Send,
{
    let hashes: Vec<u64> = if parallel {
        dataset.par_iter().map(&f).collect::<Result<_>>()?
    } else {
        dataset.iter().map(&f).collect::<Result<_>>()?
    };
    Ok(hash_of(&hashes))
}

fn nms_only(img: &SynthImage, cfg: &NmsConfig) -> Result<u64> {
    let out = nms(&img.pred, cfg)?;
    let bits: Vec<u64> = out.values().iter().map(|v| v.to_bits()).collect();
    Ok(hash_of(&bits))
}

fn nms_and_thinning(img: &SynthImage, cfg: &NmsConfig, grid: &[f64]) -> Result<u64> {
    let suppressed = nms(&img.pred, cfg)?;
    let mut h = DefaultHasher::new();
    for &t in grid {
        thin(&threshold(&suppressed, t)?).hash(&mut h);
    }
    Ok(h.finish())
}

fn supervision(img: &SynthImage, cfg: &MatchConfig, tiling: Option<(usize, usize)>) -> Result<u64> {
    Ok(hash_of(&generate_supervision(
        &img.pred, &img.gt, cfg, tiling,
    )?))
}

/// Times (a) NMS alone, (b) NMS followed by thresholding and thinning at all
/// 100 thresholds, and (c) label generation, on the same images.
pub fn pipeline_compare(
    dataset: &[SynthImage],
    nms_cfg: &NmsConfig,
    cfg: &MatchConfig,
    opts: &PipelineOptions,
) -> Result<Vec<BenchRecord>> {
    if dataset.is_empty() {
        return Err(Error::invalid("benchmark dataset is empty"));
    }
    nms_cfg.validate()?;
    cfg.validate()?;
    let (w, h) = dataset[0].pred.dims();
    let params = vec![
        ("images".to_string(), dataset.len()),
        ("width".to_string(), w),
        ("height".to_string(), h),
    ];
    let grid = threshold_grid(THRESHOLD_COUNT);
    let par = opts.parallel;

    let a = |img: &SynthImage| nms_only(img, nms_cfg);
    let b = |img: &SynthImage| nms_and_thinning(img, nms_cfg, &grid);
    let c = |img: &SynthImage| supervision(img, cfg, opts.tiling);

    // Untimed single-worker references.
    let ref_a = over_images(dataset, false, a)?;
    let ref_b = over_images(dataset, false, b)?;
    let ref_c = over_images(dataset, false, c)?;

    Ok(vec![
        measure("nms", params.clone(), opts.repetitions, ref_a, || {
            over_images(dataset, par, a)
        })?,
        measure(
            "nms+thin x100",
            params.clone(),
            opts.repetitions,
            ref_b,
            || over_images(dataset, par, b),
        )?,
        measure(
            "matching supervision",
            params,
            opts.repetitions,
            ref_c,
            || over_images(dataset, par, c),
        )?,
    ])
}

/// Fixed-column table of records.
pub fn format_table(records: &[BenchRecord]) -> String {
    let mut out = format!(
        "{:<26} {:<32} {:>12} {:>12} {:>12} {:>5}\n",
        "scenario", "params", "median_s", "min_s", "max_s", "reps"
    );
    for r in records {
        let params = r
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "{:<26} {:<32} {:>12.6} {:>12.6} {:>12.6} {:>5}\n",
            r.scenario, params, r.median_secs, r.min_secs, r.max_secs, r.repetitions
        ));
    }
    out
}
