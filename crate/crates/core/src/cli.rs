//! Argument parsing and subcommand dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crisp_match::bench::{self, BenchRecord, PipelineOptions, ScalingReport};
use crisp_match::io::{self, MapFormat};
use crisp_match::metrics::EvalImage;
use crisp_match::report::report_to_json;
use crisp_match::synth::{polyline_dataset, PolylineParams};
use crisp_match::{
    bce_matched, box_blur5, evaluate, generate_supervision, matching, nms, standard_postprocess,
    total_loss, DistanceMode, Error, EvalConfig, LossConfig, MatchConfig, NmsConfig, Protocol,
    Result,
};

#[derive(Debug, Parser)]
#[command(
    name = "crisp-match",
    version,
    about = "Matching-based crisp edge supervision and edge-map evaluation"
)]
pub struct Cli {
    /// Worker threads for dataset-level parallelism (0 = all cores).
    #[arg(long, global = true, env = "CRISP_MATCH_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match a prediction to a ground-truth map and write the supervision label.
    Match(MatchArgs),
    /// Run NMS, optionally followed by thresholding and thinning.
    Postprocess(PostprocessArgs),
    /// Evaluate a manifest of predictions and write a JSON report.
    Eval(EvalArgs),
    /// Matching BCE loss of a prediction against one or more annotations.
    Loss(LossArgs),
    /// Time label generation against the NMS + thinning baseline.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MatchOpts {
    /// Minimum confidence for a prediction pixel to be matchable.
    #[arg(long, default_value_t = 0.01)]
    pub tau_c: f64,
    /// Exclusive Manhattan distance limit for a feasible pair.
    #[arg(long, default_value_t = 4)]
    pub tau_d: usize,
    /// Weight of the confidence term in the matching cost.
    #[arg(long, default_value_t = 25.0)]
    pub alpha: f64,
    /// Match each tile of an RxC grid separately, e.g. 2x2.
    #[arg(long, value_parser = parse_tiles)]
    pub tiles: Option<(usize, usize)>,
}

impl MatchOpts {
    fn config(&self) -> Result<MatchConfig> {
        MatchConfig::new(self.tau_c, self.tau_d, self.alpha)
    }
}

#[derive(Debug, Clone, Args)]
pub struct NmsOpts {
    /// NMS neighbourhood radius along the edge normal.
    #[arg(long, default_value_t = 1)]
    pub nms_r: usize,
    /// Border fade width in pixels.
    #[arg(long, default_value_t = 5)]
    pub nms_s: usize,
    /// Survival multiplier.
    #[arg(long, default_value_t = 1.01)]
    pub nms_e: f64,
}

impl NmsOpts {
    fn config(&self) -> Result<NmsConfig> {
        NmsConfig::new(self.nms_r, self.nms_s, self.nms_e)
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Prediction map (.pgm or .emap).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth map; nonzero pixels are edges.
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub matching: MatchOpts,
    /// Output label (.pgm or .emap).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Input confidence map.
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub nms: NmsOpts,
    /// Threshold and thin the NMS output; without it the suppressed map is written.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output map (.pgm or .emap).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProtocolArg {
    Seval,
    Ceval,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistanceArg {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Tab-separated manifest: prediction path then ground-truth paths.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Seval)]
    pub protocol: ProtocolArg,
    /// Correspondence distance limit in pixels (exclusive).
    #[arg(long, default_value_t = 4.0)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = DistanceArg::Euclidean)]
    pub distance: DistanceArg,
    #[command(flatten)]
    pub nms: NmsOpts,
    /// Apply a 5x5 mean filter to every prediction before evaluation.
    #[arg(long)]
    pub box_blur: bool,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Prediction map.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth annotation; repeat for several annotators.
    #[arg(long, required = true)]
    pub gt: Vec<PathBuf>,
    #[command(flatten)]
    pub matching: MatchOpts,
    /// Weight of the matching loss in the total.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Predictions are clamped into [eps, 1 - eps].
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    /// Loss of the base model, added to the weighted matching loss.
    #[arg(long, default_value_t = 0.0)]
    pub l_model: f64,
    /// Write the gradient with respect to the prediction as EMAP.
    #[arg(long)]
    pub grad_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchScenario {
    All,
    Scaling,
    Pipeline,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchScenario::All)]
    pub scenario: BenchScenario,
    /// Matched-set sizes for the scaling run.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    pub sizes: Vec<usize>,
    /// Repetitions per measurement (at least 3).
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    /// Images in the synthetic pipeline dataset.
    #[arg(long, default_value_t = 100)]
    pub images: usize,
    #[arg(long, default_value_t = 481)]
    pub width: usize,
    #[arg(long, default_value_t = 321)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spread pipeline images over the worker pool.
    #[arg(long)]
    pub parallel: bool,
    #[command(flatten)]
    pub matching: MatchOpts,
    #[command(flatten)]
    pub nms: NmsOpts,
    /// Print JSON on standard output; the table goes to standard error.
    #[arg(long)]
    pub json: bool,
}

fn parse_tiles(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, got '{s}'"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("tile count must be a positive integer, got '{v}'"))
    };
    Ok((parse(r)?, parse(c)?))
}

fn output_format(path: &Path) -> Result<MapFormat> {
    MapFormat::from_path(path).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "{}: output must end in .pgm or .emap",
            path.display()
        ))
    })
}

fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| {
            Error::InvalidArgument(format!("cannot start {} worker threads: {e}", cli.threads))
        })?;
    pool.install(|| match cli.command {
        Command::Match(a) => run_match(a),
        Command::Postprocess(a) => run_postprocess(a),
        Command::Eval(a) => run_eval(a),
        Command::Loss(a) => run_loss(a),
        Command::Bench(a) => run_bench(a),
    })
}

fn run_match(a: MatchArgs) -> Result<()> {
    let cfg = a.matching.config()?;
    let format = output_format(&a.out)?;
    let pred = io::read_map(&a.pred)?;
    let gt = io::read_binary_map(&a.gt)?;
    let (label, cost) =
        matching::generate_supervision_with_cost(&pred, &gt, &cfg, a.matching.tiles)?;
    io::write_map(&label.label, &a.out, format)?;
    write_stdout(&format!(
        "label pixels: {}\nground-truth pixels: {}\ntotal cost: {:.16e}\n",
        label.label.count_ones(),
        gt.count_ones(),
        cost
    ))
}

fn run_postprocess(a: PostprocessArgs) -> Result<()> {
    let cfg = a.nms.config()?;
    let format = output_format(&a.out)?;
    let pred = io::read_map(&a.pred)?;
    match a.threshold {
        Some(t) => io::write_map(&standard_postprocess(&pred, &cfg, t)?, &a.out, format),
        None => io::write_map(&nms(&pred, &cfg)?, &a.out, format),
    }
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let cfg = EvalConfig {
        protocol: match a.protocol {
            ProtocolArg::Seval => Protocol::SEval,
            ProtocolArg::Ceval => Protocol::CEval,
        },
        nms: a.nms.config()?,
        tolerance: a.tolerance,
        distance: match a.distance {
            DistanceArg::Euclidean => DistanceMode::Euclidean,
            DistanceArg::Manhattan => DistanceMode::Manhattan,
        },
        ..EvalConfig::default()
    };
    let manifest = io::load_manifest(&a.manifest)?;
    let dataset = manifest
        .entries
        .iter()
        .map(|entry| {
            let pred = io::read_map(&entry.pred)?;
            Ok(EvalImage {
                id: entry.display_id(),
                pred: if a.box_blur { box_blur5(&pred) } else { pred },
                gts: entry
                    .gts
                    .iter()
                    .map(io::read_binary_map)
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let json = report_to_json(&evaluate(&dataset, &cfg)?);
    match &a.report {
        Some(path) => write_file(path, &json),
        None => write_stdout(&json),
    }
}

fn run_loss(a: LossArgs) -> Result<()> {
    let match_cfg = a.matching.config()?;
    let loss_cfg = LossConfig::new(a.beta, a.eps)?;
    let pred = io::read_map(&a.pred)?;
    let labels =
        a.gt.iter()
            .map(|path| {
                generate_supervision(
                    &pred,
                    &io::read_binary_map(path)?,
                    &match_cfg,
                    a.matching.tiles,
                )
            })
            .collect::<Result<Vec<_>>>()?;
    let loss = bce_matched(&pred, &labels, &loss_cfg)?;
    let total = total_loss(loss.value, a.l_model, &loss_cfg)?;
    if let Some(path) = &a.grad_out {
        io::write_emap_raw(path, loss.width, loss.height, &loss.gradient)?;
    }
    write_stdout(&format!(
        "{{\"l_matched\": {:.16e}, \"l_model\": {:.16e}, \"beta\": {:.16e}, \"total\": {:.16e}}}\n",
        loss.value, a.l_model, a.beta, total
    ))
}

#[derive(serde::Serialize)]
struct BenchJson {
    dense_scaling: Option<ScalingReport>,
    sparse_scaling: Option<ScalingReport>,
    pipeline: Vec<BenchRecord>,
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let match_cfg = a.matching.config()?;
    let nms_cfg = a.nms.config()?;
    let mut doc = BenchJson {
        dense_scaling: None,
        sparse_scaling: None,
        pipeline: Vec::new(),
    };
    if a.scenario != BenchScenario::Pipeline {
        doc.dense_scaling = Some(bench::scaling_bench(&a.sizes, a.trials)?);
        doc.sparse_scaling = Some(bench::sparse_scaling_bench(&a.sizes, a.trials)?);
    }
    if a.scenario != BenchScenario::Scaling {
        let data = polyline_dataset(
            a.images,
            a.width,
            a.height,
            &PolylineParams::default(),
            a.seed,
        );
        let opts = PipelineOptions {
            repetitions: a.trials,
            parallel: a.parallel,
            tiling: a.matching.tiles,
        };
        doc.pipeline = bench::pipeline_compare(&data, &nms_cfg, &match_cfg, &opts)?;
    }

    let mut records = Vec::new();
    let mut table_tail = String::new();
    for (name, report) in [
        ("dense", &doc.dense_scaling),
        ("sparse", &doc.sparse_scaling),
    ] {
        if let Some(r) = report {
            records.extend(r.records.iter().cloned());
            table_tail.push_str(&match r.slope {
                Some(s) => format!("{name} log-log slope: {s:.3}\n"),
                None => format!("{name} log-log slope: n/a\n"),
            });
        }
    }
    records.extend(doc.pipeline.iter().cloned());
    let table = bench::format_table(&records) + &table_tail;

    if a.json {
        eprint!("{table}");
        let mut json = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::InvalidArgument(format!("cannot encode benchmark results: {e}")))?;
        json.push('\n');
        write_stdout(&json)
    } else {
        write_stdout(&table)
    }
}
