//! Command-line front end. [`run`] parses arguments, executes one subcommand
//! and returns the process exit code: 0 on success, 1 for data errors and 2
//! for usage errors.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use salmetric::gaussian::density_from_fixations;
use salmetric::io::{self, find_prediction, map_file_name, read_manifest, write_json, write_manifest, write_map};
use salmetric::metrics::{evaluate_all, MetricConfig, MetricKind, DEFAULT_SPLITS};
use salmetric::quality::{quality_report, QualityConfig, QualityMeasure};
use salmetric::sampling::{SamplingContext, DEFAULT_CC_THRESHOLD, DEFAULT_K};
use salmetric::synth::{gen_dataset, gen_predictions, sigma_sweep_with, PredictionMode, SynthConfig};
use salmetric::{seed, DatasetIndex, Error, GridMap, Result, Sampler, TieBreak};
use serde::Serialize;

pub const DEFAULT_SWEEP_SIGMAS: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];
pub const DEFAULT_SYNTH_MODES: &str = "oracle,center,peripheral,quantized:3,uniform";

#[derive(Debug, Parser)]
#[command(name = "salmetric", version, about = "Saliency map evaluation against fixation data")]
pub struct Cli {
    /// Worker threads; all outputs are identical for any value.
    #[arg(long, global = true, env = "SALMETRIC_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the blurred fixation density of every image.
    Density(DensityArgs),
    /// Score prediction maps against a dataset.
    Evaluate(EvaluateArgs),
    /// Draw one negative set per image.
    Negatives(NegativesArgs),
    /// Compare samplers by negative-set quality.
    Quality(QualityArgs),
    /// Generate a synthetic dataset and predictor maps.
    Synth(SynthArgs),
    /// Score oracle predictions blurred at several sigmas.
    Sweep(SweepArgs),
    /// Break ties in a map.
    Smooth(SmoothArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    pub manifest: PathBuf,
    /// Blur sigma; the dataset's sigma when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub manifest: PathBuf,
    /// Directory holding `<id>.smap` or `<id>.pgm` per image.
    #[arg(long)]
    pub pred: PathBuf,
    /// Comma-separated metric names, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_metrics)]
    pub metrics: List<MetricKind>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_SPLITS)]
    pub splits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "global", value_parser = parse_tie_break)]
    pub tie_break: TieBreak,
    /// Ground-truth sigma; the dataset's sigma when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Use the fast farthest-neighbor scan.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, default_value_t = DEFAULT_CC_THRESHOLD, allow_negative_numbers = true)]
    pub cc_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NegativesArgs {
    pub manifest: PathBuf,
    /// judd, borji, shuffled, fn or fn-fast.
    #[arg(long, default_value = "fn")]
    pub sampler: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_CC_THRESHOLD, allow_negative_numbers = true)]
    pub cc_threshold: f64,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    pub manifest: PathBuf,
    /// Comma-separated samplers, e.g. `shuffled,fn:1,fn:5`.
    #[arg(long, default_value = "shuffled,fn:5", value_parser = parse_samplers)]
    pub samplers: List<Sampler>,
    #[arg(long, default_value = "cc", value_parser = parse_measure)]
    pub measure: QualityMeasure,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Predictor maps written under `pred/<mode>/`.
    #[arg(long, default_value = DEFAULT_SYNTH_MODES, value_parser = parse_modes)]
    pub modes: List<PredictionMode>,
    /// Sigma for oracle and quantized maps; the config's sigma when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset manifest or synthetic config.
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_SIGMAS)]
    pub sigmas: Vec<f64>,
    /// Ground-truth sigma; the dataset's sigma when omitted.
    #[arg(long)]
    pub sigma_gt: Option<f64>,
    #[arg(long, default_value = "cc,nss,sim,kld,auc-judd", value_parser = parse_metrics)]
    pub metrics: List<MetricKind>,
    #[arg(long, default_value_t = DEFAULT_SPLITS)]
    pub splits: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `.json` writes JSON, anything else tab-separated text.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    pub map: PathBuf,
    #[arg(long, default_value = "global", value_parser = parse_tie_break)]
    pub mode: TieBreak,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A comma-separated option value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_metrics(s: &str) -> std::result::Result<List<MetricKind>, String> {
    let list = MetricKind::parse_list(s).map_err(|e| e.to_string())?;
    if list.is_empty() {
        return Err("metric list is empty".into());
    }
    Ok(List(list))
}

fn parse_tie_break(s: &str) -> std::result::Result<TieBreak, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_samplers(s: &str) -> std::result::Result<List<Sampler>, String> {
    s.split(',')
        .map(|p| p.parse::<Sampler>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()
        .map(List)
}

fn parse_measure(s: &str) -> std::result::Result<QualityMeasure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_modes(s: &str) -> std::result::Result<List<PredictionMode>, String> {
    s.split(',')
        .map(|p| p.parse::<PredictionMode>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()
        .map(List)
}

/// Runs the tool with full `argv` (program name first).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn execute(cli: Cli) -> std::result::Result<(), Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => return Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = builder.build().map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Density(a) => density(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Negatives(a) => negatives(a),
        Command::Quality(a) => quality(a),
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Smooth(a) => smooth(a),
    })
    .map_err(Failure::from)
}

fn density(a: DensityArgs) -> Result<()> {
    use rayon::prelude::*;
    let ds = read_manifest(&a.manifest)?;
    let sigma = a.sigma.unwrap_or(ds.sigma());
    ds.images().par_iter().try_for_each(|img| {
        let d = density_from_fixations(&img.fixations, sigma).map_err(|e| e.in_image(&img.id))?;
        write_map(d.grid(), a.out.join(map_file_name(&img.id)))
    })
}

/// Loads one prediction per image from `dir`.
pub fn load_predictions(ds: &DatasetIndex, dir: &Path) -> Result<HashMap<String, GridMap>> {
    use rayon::prelude::*;
    ds.images()
        .par_iter()
        .map(|img| {
            let path = find_prediction(dir, &img.id).ok_or_else(|| Error::MissingPrediction(img.id.clone()))?;
            let map = io::read_map(path).map_err(|e| e.in_image(&img.id))?;
            Ok((img.id.clone(), map))
        })
        .collect()
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ds = read_manifest(&a.manifest)?;
    let preds = load_predictions(&ds, &a.pred)?;
    let config = MetricConfig {
        metrics: a.metrics.0,
        seed: a.seed,
        n_splits: a.splits,
        k: a.k,
        sigma: a.sigma,
        tie_break: a.tie_break,
        fn_fast: a.fast,
        cc_threshold: a.cc_threshold,
        ..MetricConfig::default()
    };
    let report = evaluate_all(&ds, &preds, &config)?;
    io::write_report(&report, &a.out)
}

#[derive(Serialize)]
struct NegativeFile<'a> {
    id: &'a str,
    sampler: String,
    seed: u64,
    pool_size: usize,
    undersized: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    neighbors: Vec<String>,
    points: Vec<[usize; 2]>,
}

fn negatives(a: NegativesArgs) -> Result<()> {
    use rayon::prelude::*;
    let sampler = match a.sampler.to_ascii_lowercase().as_str() {
        "fn" => Sampler::Fn { k: a.k },
        "fn-fast" => Sampler::FnFast {
            k: a.k,
            cc_threshold: a.cc_threshold,
        },
        other => other.parse()?,
    };
    let ds = read_manifest(&a.manifest)?;
    let mut ctx = SamplingContext::new(&ds);
    if sampler.needs_densities() {
        ctx = ctx.with_densities(a.sigma.unwrap_or(ds.sigma()))?;
    }
    ds.images().par_iter().enumerate().try_for_each(|(query, img)| {
        let s = seed::for_image(a.seed, &img.id);
        let draw = sampler.draw(&ctx, query, s).map_err(|e| e.in_image(&img.id))?;
        let file = NegativeFile {
            id: &img.id,
            sampler: sampler.to_string(),
            seed: s,
            pool_size: draw.pool_size,
            undersized: draw.undersized,
            neighbors: draw.neighbors,
            points: draw.negatives.iter().map(|p| [p.x, p.y]).collect(),
        };
        write_json(&file, a.out.join(format!("{}.json", img.id)))
    })
}

fn quality(a: QualityArgs) -> Result<()> {
    let ds = read_manifest(&a.manifest)?;
    let config = QualityConfig {
        seed: a.seed,
        sigma: a.sigma,
        measure: a.measure,
        ..QualityConfig::default()
    };
    write_json(&quality_report(&ds, &a.samplers.0, &config)?, &a.out)
}

fn synth(a: SynthArgs) -> Result<()> {
    let config: SynthConfig = io::read_json(&a.config)?;
    let ds = gen_dataset(&config)?;
    write_manifest(&ds, a.out.join("manifest.json"))?;
    let sigma = a.sigma.unwrap_or(config.sigma);
    for mode in a.modes.0 {
        let preds = gen_predictions(&ds, mode, sigma)?;
        let dir = a.out.join("pred").join(mode.to_string().replace(':', "-"));
        let sorted: BTreeMap<_, _> = preds.into_iter().collect();
        for (id, map) in sorted {
            write_map(&map, dir.join(map_file_name(&id)))?;
        }
    }
    Ok(())
}

/// Reads a manifest, or generates the dataset when the file is a synthetic
/// config (no `images` field).
fn load_dataset_or_synth(path: &Path) -> Result<DatasetIndex> {
    let value: serde_json::Value = io::read_json(path)?;
    if value.get("images").is_some() {
        read_manifest(path)
    } else {
        let config: SynthConfig = serde_json::from_value(value).map_err(|e| Error::SchemaError {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        gen_dataset(&config)
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    let ds = load_dataset_or_synth(&a.input)?;
    let config = MetricConfig {
        metrics: a.metrics.0,
        seed: a.seed,
        n_splits: a.splits,
        k: a.k,
        sigma: a.sigma_gt,
        ..MetricConfig::default()
    };
    let table = sigma_sweep_with(&ds, &a.sigmas, &config)?;
    if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        write_json(&table, &a.out)
    } else {
        io::write_bytes(&a.out, table.to_tsv().as_bytes())
    }
}

fn smooth(a: SmoothArgs) -> Result<()> {
    let map = io::read_map(&a.map)?;
    write_map(&a.mode.apply(&map, a.seed)?, &a.out)
}
