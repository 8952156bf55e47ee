//! Synthetic fixation datasets, predictor families and the sigma sweep.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{center_bias_map, density_from_fixations, GaussianParams, CENTER_BIAS_FRACTION, DEFAULT_SIGMA};
use crate::grid::{normalize_to_density, DensityMap, Frame, GridMap, Point};
use crate::metrics::{evaluate_all, MetricConfig, MetricKind};
use crate::sampling::{DatasetIndex, ImageRecord};
use crate::seed;

fn default_name() -> String {
    "synthetic".to_string()
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_fraction() -> f64 {
    CENTER_BIAS_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    pub fixations_per_image: usize,
    /// Probability that a fixation is drawn from the center-bias map rather
    /// than from an object cluster.
    pub center_bias_strength: f64,
    pub n_object_clusters: usize,
    pub cluster_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sigma recorded in the generated dataset.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_fraction")]
    pub center_bias_fraction: f64,
    /// Fixed cluster centers shared by every image; drawn from the
    /// center-bias map per image when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_centers: Option<Vec<(f64, f64)>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: default_name(),
            n_images: 200,
            width: 64,
            height: 64,
            fixations_per_image: 20,
            center_bias_strength: 0.8,
            n_object_clusters: 2,
            cluster_sigma: 3.0,
            seed: 0,
            sigma: DEFAULT_SIGMA,
            center_bias_fraction: CENTER_BIAS_FRACTION,
            cluster_centers: None,
        }
    }
}

impl SynthConfig {
    pub fn frame(&self) -> Result<Frame> {
        Frame::new(self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        let frame = self.frame()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_images == 0 || self.fixations_per_image == 0 || self.n_object_clusters == 0 {
            return bad("counts must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.center_bias_strength) {
            return bad("center_bias_strength must lie in [0, 1]");
        }
        if !(self.cluster_sigma > 0.0 && self.cluster_sigma.is_finite()) {
            return bad("cluster_sigma must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSigma(self.sigma));
        }
        if !(self.center_bias_fraction > 0.0 && self.center_bias_fraction <= 1.0) {
            return Err(Error::InvalidSigmaFraction(self.center_bias_fraction));
        }
        if self.fixations_per_image > frame.len() {
            return bad("more fixations per image than pixels");
        }
        if let Some(c) = &self.cluster_centers {
            if c.is_empty() || c.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
                return bad("cluster_centers must be a non-empty list of finite points");
            }
        }
        Ok(())
    }

    pub fn image_id(&self, i: usize) -> String {
        let width = self.n_images.saturating_sub(1).to_string().len().max(4);
        format!("img{i:0width$}")
    }
}

fn clamp_round(v: f64, len: usize) -> usize {
    v.round().clamp(0.0, (len - 1) as f64) as usize
}

/// Draws a pixel from the center-bias density by rejection of off-frame
/// Gaussian draws.
fn draw_center<R: Rng>(rng: &mut R, frame: Frame, fraction: f64) -> Point {
    let nx = Normal::new((frame.width as f64 - 1.0) / 2.0, fraction * frame.width as f64).expect("valid sigma");
    let ny = Normal::new((frame.height as f64 - 1.0) / 2.0, fraction * frame.height as f64).expect("valid sigma");
    loop {
        let (x, y) = (nx.sample(rng).round(), ny.sample(rng).round());
        if x >= 0.0 && y >= 0.0 && x < frame.width as f64 && y < frame.height as f64 {
            return Point::new(x as usize, y as usize);
        }
    }
}

fn draw_cluster<R: Rng>(rng: &mut R, frame: Frame, center: (f64, f64), sigma: f64) -> Point {
    let nx = Normal::new(center.0, sigma).expect("valid sigma");
    let ny = Normal::new(center.1, sigma).expect("valid sigma");
    Point::new(
        clamp_round(nx.sample(rng), frame.width),
        clamp_round(ny.sample(rng), frame.height),
    )
}

fn gen_image(config: &SynthConfig, frame: Frame, id: String) -> Result<(ImageRecord, Vec<(f64, f64)>)> {
    let mut rng = seed::rng(seed::for_image(config.seed, &id));
    let centers: Vec<(f64, f64)> = match &config.cluster_centers {
        Some(c) => c.clone(),
        None => (0..config.n_object_clusters)
            .map(|_| {
                let p = draw_center(&mut rng, frame, config.center_bias_fraction);
                (p.x as f64, p.y as f64)
            })
            .collect(),
    };
    let mut points = BTreeSet::new();
    while points.len() < config.fixations_per_image {
        let p = if rng.random::<f64>() < config.center_bias_strength {
            draw_center(&mut rng, frame, config.center_bias_fraction)
        } else {
            let c = centers[rng.random_range(0..centers.len())];
            draw_cluster(&mut rng, frame, c, config.cluster_sigma)
        };
        points.insert(p);
    }
    let record = ImageRecord::new(id, crate::grid::FixationSet::new(frame, points)?)?;
    Ok((record, centers))
}

/// Mixture density the generator samples from: `strength` times the
/// center-bias map plus the remainder split evenly over the clusters.
/// Edge clamping and duplicate redraws are not modeled.
pub fn ground_truth_density(config: &SynthConfig, centers: &[(f64, f64)]) -> Result<DensityMap> {
    let frame = config.frame()?;
    let cb = center_bias_map(frame, config.center_bias_fraction)?;
    let mut mix = cb.grid().map(|v| v * config.center_bias_strength)?;
    let share = (1.0 - config.center_bias_strength) / centers.len() as f64;
    for &c in centers {
        let blob = GaussianParams::new(config.cluster_sigma, config.cluster_sigma, c)?.field(frame);
        let blob = normalize_to_density(&blob)?;
        mix = mix.add_scaled(blob.grid(), share)?;
    }
    normalize_to_density(&mix)
}

/// Generates a dataset; every image has its own RNG stream keyed by its id.
pub fn gen_dataset(config: &SynthConfig) -> Result<DatasetIndex> {
    Ok(gen_dataset_with_truth(config)?.0)
}

/// [`gen_dataset`] plus each image's [`ground_truth_density`], in image order.
pub fn gen_dataset_with_truth(config: &SynthConfig) -> Result<(DatasetIndex, Vec<DensityMap>)> {
    config.validate()?;
    let frame = config.frame()?;
    let generated = (0..config.n_images)
        .into_par_iter()
        .map(|i| {
            let (record, centers) = gen_image(config, frame, config.image_id(i))?;
            Ok((record, ground_truth_density(config, &centers)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (images, truths): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
    Ok((DatasetIndex::new(config.name.clone(), config.sigma, images)?, truths))
}

pub const DEFAULT_QUANTIZE_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictionMode {
    Oracle,
    Center,
    Peripheral,
    Quantized(usize),
    Uniform,
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictionMode::Oracle => f.write_str("oracle"),
            PredictionMode::Center => f.write_str("center"),
            PredictionMode::Peripheral => f.write_str("peripheral"),
            PredictionMode::Quantized(n) => write!(f, "quantized:{n}"),
            PredictionMode::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for PredictionMode {
    type Err = Error;

    /// Accepts `oracle`, `center`, `peripheral`, `uniform`, `quantized`,
    /// `quantized:N` and `quantized(N)`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let unknown = || Error::UnknownMode(s.to_string());
        Ok(match key.as_str() {
            "oracle" => PredictionMode::Oracle,
            "center" | "cb" => PredictionMode::Center,
            "peripheral" => PredictionMode::Peripheral,
            "uniform" => PredictionMode::Uniform,
            "quantized" => PredictionMode::Quantized(DEFAULT_QUANTIZE_LEVELS),
            other => {
                let n = other
                    .strip_prefix("quantized:")
                    .or_else(|| other.strip_prefix("quantized(").and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(unknown)?;
                let n: usize = n.parse().map_err(|_| unknown())?;
                if n < 2 {
                    return Err(unknown());
                }
                PredictionMode::Quantized(n)
            }
        })
    }
}

/// Bins `map` into `levels` equal-probability levels `{0, 1/(levels-1), .., 1}`.
///
/// Tied values always share a level. When there are at least `levels`
/// distinct values every level is used.
pub fn quantize(map: &GridMap, levels: usize) -> Result<GridMap> {
    if levels < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 levels, got {levels}")));
    }
    let mut sorted = map.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match groups.last_mut() {
            Some((g, c)) if *g == v => *c += 1,
            _ => groups.push((v, 1)),
        }
    }
    let (m, n, len) = (groups.len(), levels, map.len());
    let mut table = Vec::with_capacity(m);
    let (mut before, mut prev) = (0usize, 0usize);
    for (i, &(v, count)) in groups.iter().enumerate() {
        let target = before * n / len;
        let mut level = if i == 0 { 0 } else { target.max(prev).min(prev + 1) };
        if n + i >= m {
            level = level.max(n + i - m);
        }
        table.push((v, level));
        prev = level;
        before += count;
    }
    let top = (n - 1) as f64;
    map.map(|v| {
        let i = table.partition_point(|&(g, _)| g < v);
        table[i].1 as f64 / top
    })
}

/// Prediction map for one image.
pub fn gen_prediction(image: &ImageRecord, mode: PredictionMode, sigma: f64) -> Result<GridMap> {
    let frame = image.frame();
    match mode {
        PredictionMode::Oracle => Ok(density_from_fixations(&image.fixations, sigma)?.into_grid()),
        PredictionMode::Center => Ok(center_bias_map(frame, CENTER_BIAS_FRACTION)?.into_grid()),
        PredictionMode::Peripheral => {
            let cb = center_bias_map(frame, CENTER_BIAS_FRACTION)?;
            let peak = cb.max();
            let inv = cb.map(|v| 1.0 - v / peak)?;
            let top = inv.max();
            if top > 0.0 {
                inv.map(|v| v / top)
            } else {
                Ok(inv)
            }
        }
        PredictionMode::Quantized(n) => quantize(density_from_fixations(&image.fixations, sigma)?.grid(), n),
        PredictionMode::Uniform => Ok(GridMap::filled(frame, 1.0)),
    }
}

/// Predictions for every image of a dataset, keyed by id.
pub fn gen_predictions(dataset: &DatasetIndex, mode: PredictionMode, sigma: f64) -> Result<HashMap<String, GridMap>> {
    dataset
        .images()
        .par_iter()
        .map(|img| {
            gen_prediction(img, mode, sigma)
                .map(|m| (img.id.clone(), m))
                .map_err(|e| e.in_image(&img.id))
        })
        .collect()
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// One mean score per entry of `SweepTable::sigmas`.
    pub scores: Vec<f64>,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub dataset: String,
    pub sigmas: Vec<f64>,
    pub sigma_gt: f64,
    pub rows: BTreeMap<String, SweepRow>,
}

impl SweepTable {
    pub fn row(&self, metric: MetricKind) -> Option<&SweepRow> {
        self.rows.get(metric.name())
    }

    /// Sigma at which the metric's score is largest.
    pub fn argmax_sigma(&self, metric: MetricKind) -> Option<f64> {
        let row = self.row(metric)?;
        let best = row
            .scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?
            .0;
        Some(self.sigmas[best])
    }

    /// Tab-separated text: header line, then one line per metric.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric");
        for s in &self.sigmas {
            out.push_str(&format!("\tsigma={s}"));
        }
        out.push_str("\tdeviation\n");
        for (name, row) in &self.rows {
            out.push_str(name);
            for v in &row.scores {
                out.push_str(&format!("\t{v:.17e}"));
            }
            out.push_str(&format!("\t{:.17e}\n", row.deviation));
        }
        out
    }
}

/// Sweep with full control over the metric settings; `config.sigma` is the
/// ground-truth sigma.
pub fn sigma_sweep_with(dataset: &DatasetIndex, sigmas: &[f64], config: &MetricConfig) -> Result<SweepTable> {
    if sigmas.is_empty() {
        return Err(Error::InvalidConfig("sigma list is empty".into()));
    }
    if config.metrics.is_empty() {
        return Err(Error::InvalidConfig("metric list is empty".into()));
    }
    let sigma_gt = config.sigma.unwrap_or(dataset.sigma());
    let mut columns = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let preds = gen_predictions(dataset, PredictionMode::Oracle, s)?;
        columns.push(evaluate_all(dataset, &preds, config)?.aggregate);
    }
    let rows = config
        .metrics
        .iter()
        .map(|m| {
            let scores: Vec<f64> = columns.iter().map(|c| c[m.name()]).collect();
            let deviation = sample_std(&scores);
            (m.name().to_string(), SweepRow { scores, deviation })
        })
        .collect();
    Ok(SweepTable {
        dataset: dataset.name().to_string(),
        sigmas: sigmas.to_vec(),
        sigma_gt,
        rows,
    })
}

/// For each training sigma the prediction is the oracle density at that
/// sigma; ground truth is the fixations and their density at `sigma_gt`.
pub fn sigma_sweep(
    dataset: &DatasetIndex,
    sigmas: &[f64],
    sigma_gt: f64,
    metrics: &[MetricKind],
    seed: u64,
) -> Result<SweepTable> {
    let config = MetricConfig {
        metrics: metrics.to_vec(),
        seed,
        sigma: Some(sigma_gt),
        ..MetricConfig::default()
    };
    sigma_sweep_with(dataset, sigmas, &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::aggregate_density;
    use crate::metrics::cc;

    fn small(strength: f64, n: usize) -> SynthConfig {
        SynthConfig {
            n_images: n,
            center_bias_strength: strength,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let c = small(0.5, 20);
        let a = gen_dataset(&c).unwrap();
        let b = gen_dataset(&c).unwrap();
        assert_eq!(a.images(), b.images());
        let other = gen_dataset(&SynthConfig { seed: 4, ..c }).unwrap();
        assert_ne!(a.images(), other.images());
    }

    #[test]
    fn fixations_in_bounds_and_counted() {
        let c = SynthConfig {
            width: 20,
            height: 10,
            cluster_centers: Some(vec![(0.0, 0.0), (19.0, 9.0)]),
            cluster_sigma: 6.0,
            center_bias_strength: 0.1,
            ..small(0.1, 30)
        };
        for img in gen_dataset(&c).unwrap().images() {
            assert_eq!(img.fixations.len(), c.fixations_per_image);
            assert!(img.fixations.iter().all(|p| p.x < 20 && p.y < 10));
        }
    }

    #[test]
    fn pure_center_bias_matches_cb() {
        let ds = gen_dataset(&small(1.0, 200)).unwrap();
        let f = ds.frame().unwrap();
        let pooled = aggregate_density(&ds, 3.0).unwrap();
        let v = cc(&pooled, &center_bias_map(f, CENTER_BIAS_FRACTION).unwrap()).unwrap();
        assert!(v > 0.9, "{v}");
    }

    #[test]
    fn corner_clusters_anticorrelate_with_cb() {
        let c = SynthConfig {
            cluster_centers: Some(vec![(2.0, 2.0), (61.0, 61.0)]),
            ..small(0.0, 50)
        };
        let ds = gen_dataset(&c).unwrap();
        let pooled = aggregate_density(&ds, 3.0).unwrap();
        let v = cc(&pooled, &center_bias_map(ds.frame().unwrap(), CENTER_BIAS_FRACTION).unwrap()).unwrap();
        assert!(v < 0.0, "{v}");
    }

    #[test]
    fn truth_is_the_sampling_mixture() {
        let c = small(1.0, 10);
        let (ds, truths) = gen_dataset_with_truth(&c).unwrap();
        assert_eq!(ds, gen_dataset(&c).unwrap());
        let cb = center_bias_map(c.frame().unwrap(), c.center_bias_fraction).unwrap();
        for t in &truths {
            assert!((t.grid().sum() - 1.0).abs() < 1e-12);
            assert!(t.values().iter().zip(cb.values()).all(|(a, b)| (a - b).abs() < 1e-15));
        }
        let corner = SynthConfig {
            center_bias_strength: 0.0,
            cluster_centers: Some(vec![(0.0, 0.0)]),
            ..small(0.0, 3)
        };
        let (_, truths) = gen_dataset_with_truth(&corner).unwrap();
        assert_eq!(truths[0].argmax(), Point::new(0, 0));
    }

    #[test]
    fn invalid_configs() {
        assert!(gen_dataset(&SynthConfig { center_bias_strength: 1.5, ..small(0.0, 1) }).is_err());
        assert!(gen_dataset(&SynthConfig { n_images: 0, ..small(0.0, 1) }).is_err());
        assert!(gen_dataset(&SynthConfig { width: 2, height: 2, ..small(0.0, 1) }).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: SynthConfig = serde_json::from_str(
            r#"{"n_images":3,"width":8,"height":8,"fixations_per_image":2,
                "center_bias_strength":0.5,"n_object_clusters":1,"cluster_sigma":1.0}"#,
        )
        .unwrap();
        assert_eq!(c.sigma, DEFAULT_SIGMA);
        assert_eq!(c.name, "synthetic");
        assert_eq!(c.seed, 0);
    }

    fn distinct(m: &GridMap) -> Vec<f64> {
        let mut v = m.values().to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    #[test]
    fn prediction_modes() {
        let ds = gen_dataset(&small(0.5, 3)).unwrap();
        let img = &ds.images()[0];
        let q = gen_prediction(img, PredictionMode::Quantized(3), 19.0).unwrap();
        assert_eq!(distinct(&q), [0.0, 0.5, 1.0]);
        let u = gen_prediction(img, PredictionMode::Uniform, 19.0).unwrap();
        assert_eq!(distinct(&u).len(), 1);
        let p = gen_prediction(img, PredictionMode::Peripheral, 19.0).unwrap();
        let a = p.argmax();
        assert!(a.x == 0 || a.y == 0 || a.x == 63 || a.y == 63);
        assert_eq!(p.max(), 1.0);
        let o = gen_prediction(img, PredictionMode::Oracle, 19.0).unwrap();
        assert!((o.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quantize_handles_heavy_ties() {
        // 90% zeros still yields three levels and keeps ties together
        let mut v = vec![0.0; 90];
        v.extend((1..=10).map(|i| i as f64));
        let m = GridMap::new(10, 10, v).unwrap();
        let q = quantize(&m, 3).unwrap();
        assert_eq!(distinct(&q), [0.0, 0.5, 1.0]);
        assert!(q.values()[..90].iter().all(|&x| x == 0.0));
        // order is never reversed
        for i in 0..100 {
            for j in 0..100 {
                if m.values()[i] < m.values()[j] {
                    assert!(q.values()[i] <= q.values()[j]);
                }
            }
        }
        let two = GridMap::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(distinct(&quantize(&two, 3).unwrap()).len(), 2);
    }

    #[test]
    fn quantize_equal_probability() {
        let m = GridMap::new(30, 1, (0..30).map(|i| i as f64).collect()).unwrap();
        let q = quantize(&m, 3).unwrap();
        for level in [0.0, 0.5, 1.0] {
            assert_eq!(q.values().iter().filter(|&&x| x == level).count(), 10);
        }
    }

    #[test]
    fn modes_parse() {
        assert_eq!("quantized".parse::<PredictionMode>().unwrap(), PredictionMode::Quantized(3));
        assert_eq!("quantized(5)".parse::<PredictionMode>().unwrap(), PredictionMode::Quantized(5));
        assert_eq!("quantized:4".parse::<PredictionMode>().unwrap(), PredictionMode::Quantized(4));
        assert!(matches!("blobs".parse::<PredictionMode>(), Err(Error::UnknownMode(_))));
        assert!("quantized:1".parse::<PredictionMode>().is_err());
        for m in ["oracle", "center", "peripheral", "uniform", "quantized:3"] {
            assert_eq!(m.parse::<PredictionMode>().unwrap().to_string(), m);
        }
    }

    #[test]
    fn sweep_deviation_is_sample_std() {
        let ds = gen_dataset(&SynthConfig {
            n_images: 8,
            width: 48,
            height: 48,
            ..small(0.5, 8)
        })
        .unwrap();
        let t = sigma_sweep(&ds, &[4.0, 8.0, 12.0], 8.0, &[MetricKind::Cc, MetricKind::Nss], 1).unwrap();
        for row in t.rows.values() {
            let n = row.scores.len() as f64;
            let mean = row.scores.iter().sum::<f64>() / n;
            let var = row.scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
            assert!((row.deviation - var.sqrt()).abs() < 1e-12);
        }
        assert_eq!(t.argmax_sigma(MetricKind::Cc), Some(8.0));
        assert!(t.to_tsv().starts_with("metric\tsigma=4"));
        assert!(sigma_sweep(&ds, &[], 8.0, &[MetricKind::Cc], 1).is_err());
    }
}
