//! The metric suite and the dataset-level evaluator.
//!
//! Distribution metrics (CC, SIM, KLD, IG) compare unit-mass maps; NSS and the
//! AUC variants consume the raw prediction. AUCs are computed on the
//! tie-broken prediction unless tie-breaking is switched off.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{center_bias_map, density_from_fixations, CENTER_BIAS_FRACTION};
use crate::grid::{ensure_same_frame, normalize_to_density, DensityMap, FixationSet, GridMap};
use crate::roc::{auc_averaged, auc_single, AucSummary};
use crate::sampling::{DatasetIndex, Sampler, SamplingContext, DEFAULT_CC_THRESHOLD, DEFAULT_K};
use crate::seed;
use crate::smoothing::smallest_gap;
pub use crate::smoothing::TieBreak;

/// Regularizer for KLD and IG: the `f64` machine epsilon.
pub const LOG_EPSILON: f64 = f64::EPSILON;
pub const DEFAULT_SPLITS: usize = 100;

const TIE_STREAM: u64 = 0x71e;

/// Pearson correlation of two maps.
pub fn cc(a: &GridMap, b: &GridMap) -> Result<f64> {
    ensure_same_frame(a, b)?;
    let (ma, mb) = (a.mean(), b.mean());
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

/// Mean z-score of the prediction at the fixations (population std).
pub fn nss(pred: &GridMap, fixations: &FixationSet) -> Result<f64> {
    if fixations.frame() != pred.frame() {
        return Err(Error::DimensionMismatch {
            left: pred.frame().to_string(),
            right: fixations.frame().to_string(),
        });
    }
    if fixations.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let std = pred.std();
    if std == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mean = pred.mean();
    let total: f64 = fixations.iter().map(|p| (pred.at(p) - mean) / std).sum();
    Ok(total / fixations.len() as f64)
}

/// Histogram intersection of two densities.
pub fn sim(a: &DensityMap, b: &DensityMap) -> Result<f64> {
    ensure_same_frame(a, b)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x.min(*y)).sum())
}

/// `sum gt * ln(gt / (pred + eps))` over pixels where `gt > 0`.
pub fn kld(gt: &DensityMap, pred: &DensityMap) -> Result<f64> {
    ensure_same_frame(gt, pred)?;
    Ok(gt
        .values()
        .iter()
        .zip(pred.values())
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, p)| g * (g / (p + LOG_EPSILON)).ln())
        .sum())
}

/// Mean log2 likelihood gain over a baseline at the fixations, in bits.
pub fn ig(pred: &DensityMap, fixations: &FixationSet, baseline: &DensityMap) -> Result<f64> {
    ensure_same_frame(pred, baseline)?;
    if fixations.frame() != pred.frame() {
        return Err(Error::DimensionMismatch {
            left: pred.frame().to_string(),
            right: fixations.frame().to_string(),
        });
    }
    if fixations.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let total: f64 = fixations
        .iter()
        .map(|p| (pred.at(p) + LOG_EPSILON).log2() - (baseline.at(p) + LOG_EPSILON).log2())
        .sum();
    Ok(total / fixations.len() as f64)
}

/// Shared options of the AUC variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucOptions {
    pub n_splits: usize,
    pub seed: u64,
    pub tie_break: TieBreak,
}

impl Default for AucOptions {
    fn default() -> Self {
        AucOptions {
            n_splits: DEFAULT_SPLITS,
            seed: 0,
            tie_break: TieBreak::Global,
        }
    }
}

/// Applies tie-breaking before thresholding. A constant prediction carries
/// no ranking and is left unchanged, so it scores 0.5 under every variant.
pub fn prepare_for_auc(pred: &GridMap, tie_break: TieBreak, seed: u64) -> Result<GridMap> {
    if smallest_gap(pred).is_none() {
        return Ok(pred.clone());
    }
    tie_break.apply(pred, seed::derive(seed, TIE_STREAM))
}

/// AUC over a sampled negative set, with the count of undersized draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAuc {
    pub summary: AucSummary,
    pub undersized_draws: usize,
}

/// Averages the AUC of an already tie-broken prediction over `n_splits`
/// draws of `sampler` for image `query`.
pub fn sampled_auc(
    pred: &GridMap,
    ctx: &SamplingContext<'_>,
    query: usize,
    sampler: Sampler,
    n_splits: usize,
    seed: u64,
) -> Result<SampledAuc> {
    let positives = &ctx
        .dataset()
        .images()
        .get(query)
        .ok_or_else(|| Error::UnknownImage(format!("#{query}")))?
        .fixations;
    let undersized = AtomicUsize::new(0);
    let summary = auc_averaged(
        pred,
        positives,
        |s| {
            let draw = sampler.draw(ctx, query, s)?;
            if draw.undersized {
                undersized.fetch_add(1, Ordering::Relaxed);
            }
            Ok(draw.negatives)
        },
        n_splits,
        seed,
    )?;
    Ok(SampledAuc {
        summary,
        undersized_draws: undersized.into_inner(),
    })
}

/// AUC with every non-fixated pixel as a negative.
pub fn auc_judd(pred: &GridMap, fixations: &FixationSet, opts: &AucOptions) -> Result<f64> {
    let pred = prepare_for_auc(pred, opts.tie_break, opts.seed)?;
    let negatives = crate::sampling::negatives_judd(pred.frame(), fixations);
    auc_single(&pred, fixations, &negatives)
}

/// AUC with `|P|` uniformly drawn non-fixated pixels per split.
pub fn auc_borji(pred: &GridMap, fixations: &FixationSet, opts: &AucOptions) -> Result<AucSummary> {
    let pred = prepare_for_auc(pred, opts.tie_break, opts.seed)?;
    let frame = pred.frame();
    auc_averaged(
        &pred,
        fixations,
        |s| crate::sampling::negatives_borji(frame, fixations, s),
        opts.n_splits,
        opts.seed,
    )
}

/// Shuffled AUC: negatives are other images' fixations.
pub fn s_auc(pred: &GridMap, image_id: &str, dataset: &DatasetIndex, opts: &AucOptions) -> Result<AucSummary> {
    let pred = prepare_for_auc(pred, opts.tie_break, opts.seed)?;
    let ctx = SamplingContext::new(dataset);
    let query = dataset.position(image_id)?;
    Ok(sampled_auc(&pred, &ctx, query, Sampler::Shuffled, opts.n_splits, opts.seed)?.summary)
}

/// Farthest-neighbor AUC with the exact ranking over `k` neighbors.
pub fn fn_auc(
    pred: &GridMap,
    image_id: &str,
    dataset: &DatasetIndex,
    k: usize,
    sigma: f64,
    opts: &AucOptions,
) -> Result<SampledAuc> {
    fn_auc_with(pred, image_id, dataset, Sampler::Fn { k }, sigma, opts)
}

/// Farthest-neighbor AUC with an explicit (exact or fast) sampler.
pub fn fn_auc_with(
    pred: &GridMap,
    image_id: &str,
    dataset: &DatasetIndex,
    sampler: Sampler,
    sigma: f64,
    opts: &AucOptions,
) -> Result<SampledAuc> {
    let pred = prepare_for_auc(pred, opts.tie_break, opts.seed)?;
    let ctx = SamplingContext::new(dataset).with_densities(sigma)?;
    let query = dataset.position(image_id)?;
    sampled_auc(&pred, &ctx, query, sampler, opts.n_splits, opts.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "cc")]
    Cc,
    #[serde(rename = "nss")]
    Nss,
    #[serde(rename = "sim")]
    Sim,
    #[serde(rename = "kld")]
    Kld,
    #[serde(rename = "ig")]
    Ig,
    #[serde(rename = "auc-judd")]
    AucJudd,
    #[serde(rename = "auc-borji")]
    AucBorji,
    #[serde(rename = "s-auc")]
    SAuc,
    #[serde(rename = "fn-auc")]
    FnAuc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 9] = [
        MetricKind::Cc,
        MetricKind::Nss,
        MetricKind::Sim,
        MetricKind::Kld,
        MetricKind::Ig,
        MetricKind::AucJudd,
        MetricKind::AucBorji,
        MetricKind::SAuc,
        MetricKind::FnAuc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Cc => "cc",
            MetricKind::Nss => "nss",
            MetricKind::Sim => "sim",
            MetricKind::Kld => "kld",
            MetricKind::Ig => "ig",
            MetricKind::AucJudd => "auc-judd",
            MetricKind::AucBorji => "auc-borji",
            MetricKind::SAuc => "s-auc",
            MetricKind::FnAuc => "fn-auc",
        }
    }

    pub fn is_distribution(&self) -> bool {
        matches!(self, MetricKind::Cc | MetricKind::Sim | MetricKind::Kld | MetricKind::Ig)
    }

    pub fn is_auc(&self) -> bool {
        matches!(
            self,
            MetricKind::AucJudd | MetricKind::AucBorji | MetricKind::SAuc | MetricKind::FnAuc
        )
    }

    /// Parses a comma-separated list; `all` expands to every metric.
    pub fn parse_list(s: &str) -> Result<Vec<MetricKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(MetricKind::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let alias = match key.as_str() {
            "auc-j" | "aucj" | "judd" => "auc-judd",
            "auc-b" | "aucb" | "borji" => "auc-borji",
            "sauc" | "shuffled" => "s-auc",
            "fnauc" | "fn" => "fn-auc",
            other => other,
        };
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == alias)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

/// Everything that determines a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub metrics: Vec<MetricKind>,
    pub seed: u64,
    pub n_splits: usize,
    pub k: usize,
    /// Ground-truth blur sigma; the dataset's own sigma when unset.
    pub sigma: Option<f64>,
    pub tie_break: TieBreak,
    /// Use the fast farthest-neighbor scan instead of the full ranking.
    pub fn_fast: bool,
    pub cc_threshold: f64,
    pub center_bias_fraction: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            metrics: MetricKind::ALL.to_vec(),
            seed: 0,
            n_splits: DEFAULT_SPLITS,
            k: DEFAULT_K,
            sigma: None,
            tie_break: TieBreak::Global,
            fn_fast: false,
            cc_threshold: DEFAULT_CC_THRESHOLD,
            center_bias_fraction: CENTER_BIAS_FRACTION,
        }
    }
}

impl MetricConfig {
    pub fn fn_sampler(&self) -> Sampler {
        if self.fn_fast {
            Sampler::FnFast {
                k: self.k,
                cc_threshold: self.cc_threshold,
            }
        } else {
            Sampler::Fn { k: self.k }
        }
    }
}

/// One metric value for one image. Sampled AUCs also carry their spread and
/// sampling metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_splits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undersized_draws: Option<usize>,
}

impl MetricScore {
    fn plain(value: f64) -> Self {
        MetricScore {
            value,
            std: None,
            n_splits: None,
            sampler: None,
            undersized_draws: None,
        }
    }

    fn sampled(auc: SampledAuc, sampler: Sampler) -> Self {
        MetricScore {
            value: auc.summary.mean,
            std: Some(auc.summary.std),
            n_splits: Some(auc.summary.n_splits),
            sampler: Some(sampler.to_string()),
            undersized_draws: Some(auc.undersized_draws),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    /// Seed derived from the config seed and the image id.
    pub seed: u64,
    pub tie_break: TieBreak,
    pub scores: BTreeMap<String, MetricScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    /// Config with `sigma` resolved.
    pub config: MetricConfig,
    pub per_image: BTreeMap<String, ImageReport>,
    /// Mean of the per-image values of each metric.
    pub aggregate: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn recompute_aggregate(per_image: &BTreeMap<String, ImageReport>) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for report in per_image.values() {
            for (name, score) in &report.scores {
                let e = sums.entry(name.clone()).or_insert((0.0, 0));
                e.0 += score.value;
                e.1 += 1;
            }
        }
        sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}

struct ImageInputs<'a> {
    query: usize,
    pred: &'a GridMap,
    ctx: &'a SamplingContext<'a>,
    sigma: f64,
    config: &'a MetricConfig,
}

fn evaluate_image(inputs: ImageInputs<'_>) -> Result<ImageReport> {
    let ImageInputs {
        query,
        pred,
        ctx,
        sigma,
        config,
    } = inputs;
    let image = &ctx.dataset().images()[query];
    let fixations = &image.fixations;
    ensure_same_frame(pred, &GridMap::zeros(image.frame()))?;
    let image_seed = seed::for_image(config.seed, &image.id);

    let needs_density = config.metrics.iter().any(MetricKind::is_distribution);
    let densities = if needs_density {
        Some((normalize_to_density(pred)?, density_from_fixations(fixations, sigma)?))
    } else {
        None
    };
    let ranked = if config.metrics.iter().any(MetricKind::is_auc) {
        Some(prepare_for_auc(pred, config.tie_break, image_seed)?)
    } else {
        None
    };

    let mut scores = BTreeMap::new();
    for (stream, metric) in config.metrics.iter().enumerate() {
        let metric_seed = seed::derive(image_seed, stream as u64 + 1);
        let score = match metric {
            MetricKind::Cc => {
                let (p, g) = densities.as_ref().expect("densities computed");
                MetricScore::plain(cc(p, g)?)
            }
            MetricKind::Sim => {
                let (p, g) = densities.as_ref().expect("densities computed");
                MetricScore::plain(sim(p, g)?)
            }
            MetricKind::Kld => {
                let (p, g) = densities.as_ref().expect("densities computed");
                MetricScore::plain(kld(g, p)?)
            }
            MetricKind::Ig => {
                let (p, _) = densities.as_ref().expect("densities computed");
                let baseline = center_bias_map(image.frame(), config.center_bias_fraction)?;
                MetricScore::plain(ig(p, fixations, &baseline)?)
            }
            MetricKind::Nss => MetricScore::plain(nss(pred, fixations)?),
            MetricKind::AucJudd => {
                let ranked = ranked.as_ref().expect("tie-broken prediction");
                let draw = Sampler::Judd.draw(ctx, query, metric_seed)?;
                MetricScore::plain(auc_single(ranked, fixations, &draw.negatives)?)
            }
            MetricKind::AucBorji | MetricKind::SAuc | MetricKind::FnAuc => {
                let ranked = ranked.as_ref().expect("tie-broken prediction");
                let sampler = match metric {
                    MetricKind::AucBorji => Sampler::Borji,
                    MetricKind::SAuc => Sampler::Shuffled,
                    _ => config.fn_sampler(),
                };
                let auc = sampled_auc(ranked, ctx, query, sampler, config.n_splits, metric_seed)?;
                MetricScore::sampled(auc, sampler)
            }
        };
        scores.insert(metric.name().to_string(), score);
    }
    Ok(ImageReport {
        seed: image_seed,
        tie_break: config.tie_break,
        scores,
    })
}

/// Scores every image of `dataset` against its prediction. Images are
/// evaluated in parallel; all randomness is keyed by `(config.seed, image id)`.
pub fn evaluate_all(
    dataset: &DatasetIndex,
    predictions: &HashMap<String, GridMap>,
    config: &MetricConfig,
) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.n_splits == 0 {
        return Err(Error::InvalidSplits);
    }
    for img in dataset.images() {
        let pred = predictions
            .get(&img.id)
            .ok_or_else(|| Error::MissingPrediction(img.id.clone()))?;
        ensure_same_frame(pred, &GridMap::zeros(img.frame())).map_err(|e| e.in_image(&img.id))?;
    }
    let sigma = config.sigma.unwrap_or(dataset.sigma());
    let mut resolved = config.clone();
    resolved.sigma = Some(sigma);

    let mut ctx = SamplingContext::new(dataset);
    if config.metrics.contains(&MetricKind::FnAuc) {
        ctx = ctx.with_densities(sigma)?;
    }
    let reports = dataset
        .images()
        .par_iter()
        .enumerate()
        .map(|(query, img)| {
            evaluate_image(ImageInputs {
                query,
                pred: &predictions[&img.id],
                ctx: &ctx,
                sigma,
                config: &resolved,
            })
            .map(|r| (img.id.clone(), r))
            .map_err(|e| e.in_image(&img.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_image: BTreeMap<String, ImageReport> = reports.into_iter().collect();
    let aggregate = MetricReport::recompute_aggregate(&per_image);
    Ok(MetricReport {
        dataset: dataset.name().to_string(),
        config: resolved,
        per_image,
        aggregate,
    })
}
