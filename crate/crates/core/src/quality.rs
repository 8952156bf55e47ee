//! Quality of a negative set: how strongly it penalizes the center-bias map
//! (beta, higher is better) and how much it overlaps the positives (gamma,
//! lower is better).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{center_bias_map, density_from_fixations, CENTER_BIAS_FRACTION};
use crate::grid::{DensityMap, FixationSet};
use crate::metrics::{auc_judd, cc, AucOptions};
use crate::sampling::{DatasetIndex, Sampler, SamplingContext};
use crate::seed;
use crate::smoothing::TieBreak;

/// Score used for both beta and gamma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualityMeasure {
    /// CC between densities.
    #[default]
    Cc,
    /// AUC-Judd of the prediction map against the fixation set.
    AucJudd,
}

impl std::str::FromStr for QualityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cc" => Ok(QualityMeasure::Cc),
            "auc" | "auc-judd" => Ok(QualityMeasure::AucJudd),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityTriple {
    pub beta: f64,
    pub gamma: f64,
    /// `gamma / beta`, `None` when `beta == 0`.
    pub ratio: Option<f64>,
}

impl QualityTriple {
    pub fn new(beta: f64, gamma: f64) -> Self {
        QualityTriple {
            beta,
            gamma,
            ratio: (beta != 0.0).then(|| gamma / beta),
        }
    }
}

fn auc_against(pred: &DensityMap, fixations: &FixationSet) -> Result<f64> {
    let opts = AucOptions {
        tie_break: TieBreak::Global,
        ..AucOptions::default()
    };
    auc_judd(pred.grid(), fixations, &opts)
}

/// Power of `negatives` to penalize the center-bias map `cb`.
pub fn beta_with(negatives: &FixationSet, cb: &DensityMap, sigma: f64, measure: QualityMeasure) -> Result<f64> {
    if negatives.is_empty() {
        return Err(Error::EmptyFixations);
    }
    match measure {
        QualityMeasure::Cc => cc(density_from_fixations(negatives, sigma)?.grid(), cb),
        QualityMeasure::AucJudd => auc_against(cb, negatives),
    }
}

pub fn beta(negatives: &FixationSet, cb: &DensityMap, sigma: f64) -> Result<f64> {
    beta_with(negatives, cb, sigma, QualityMeasure::Cc)
}

/// How well `negatives`, read as a prediction, predicts `positives`.
pub fn gamma_with(
    negatives: &FixationSet,
    positives: &FixationSet,
    sigma: f64,
    measure: QualityMeasure,
) -> Result<f64> {
    if negatives.is_empty() || positives.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let neg = density_from_fixations(negatives, sigma)?;
    match measure {
        QualityMeasure::Cc => cc(&neg, density_from_fixations(positives, sigma)?.grid()),
        QualityMeasure::AucJudd => auc_against(&neg, positives),
    }
}

pub fn gamma(negatives: &FixationSet, positives: &FixationSet, sigma: f64) -> Result<f64> {
    gamma_with(negatives, positives, sigma, QualityMeasure::Cc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub seed: u64,
    /// Density sigma; the dataset's own sigma when unset.
    pub sigma: Option<f64>,
    pub measure: QualityMeasure,
    pub center_bias_fraction: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            seed: 0,
            sigma: None,
            measure: QualityMeasure::Cc,
            center_bias_fraction: CENTER_BIAS_FRACTION,
        }
    }
}

/// Dataset means for one sampler. `ratio` averages the defined per-image
/// ratios; `undefined_ratios` counts images with `beta == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerQuality {
    pub sampler: String,
    pub beta: f64,
    pub gamma: f64,
    pub ratio: Option<f64>,
    pub undefined_ratios: usize,
    pub undersized_draws: usize,
    pub per_image: BTreeMap<String, QualityTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub dataset: String,
    pub config: QualityConfig,
    pub samplers: Vec<SamplerQuality>,
}

impl QualityReport {
    pub fn get(&self, sampler: &str) -> Option<&SamplerQuality> {
        self.samplers.iter().find(|s| s.sampler == sampler)
    }
}

fn summarize(sampler: Sampler, rows: Vec<(String, QualityTriple, bool)>) -> SamplerQuality {
    let n = rows.len() as f64;
    let beta = rows.iter().map(|r| r.1.beta).sum::<f64>() / n;
    let gamma = rows.iter().map(|r| r.1.gamma).sum::<f64>() / n;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.1.ratio).collect();
    let ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    SamplerQuality {
        sampler: sampler.to_string(),
        beta,
        gamma,
        ratio,
        undefined_ratios: rows.len() - ratios.len(),
        undersized_draws: rows.iter().filter(|r| r.2).count(),
        per_image: rows.into_iter().map(|(id, t, _)| (id, t)).collect(),
    }
}

/// Draws one negative set per image and sampler and averages the triples.
pub fn quality_report(dataset: &DatasetIndex, samplers: &[Sampler], config: &QualityConfig) -> Result<QualityReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sigma = config.sigma.unwrap_or(dataset.sigma());
    let mut resolved = config.clone();
    resolved.sigma = Some(sigma);

    let mut ctx = SamplingContext::new(dataset);
    if samplers.iter().any(Sampler::needs_densities) {
        ctx = ctx.with_densities(sigma)?;
    }
    let mut out = Vec::with_capacity(samplers.len());
    for &sampler in samplers {
        let stream = seed::hash_id(&sampler.to_string());
        let rows = dataset
            .images()
            .par_iter()
            .enumerate()
            .map(|(query, img)| {
                let run = || -> Result<(String, QualityTriple, bool)> {
                    let s = seed::derive(seed::for_image(config.seed, &img.id), stream);
                    let draw = sampler.draw(&ctx, query, s)?;
                    let cb = center_bias_map(img.frame(), config.center_bias_fraction)?;
                    let b = beta_with(&draw.negatives, &cb, sigma, config.measure)?;
                    let g = gamma_with(&draw.negatives, &img.fixations, sigma, config.measure)?;
                    Ok((img.id.clone(), QualityTriple::new(b, g), draw.undersized))
                };
                run().map_err(|e| e.in_image(&img.id))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(summarize(sampler, rows));
    }
    Ok(QualityReport {
        dataset: dataset.name().to_string(),
        config: resolved,
        samplers: out,
    })
}
