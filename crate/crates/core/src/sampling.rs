//! Datasets and negative-set construction for the AUC family.
//!
//! * Judd: every non-fixated pixel.
//! * Borji: a uniform sample of the Judd set, `|N| = |P|`.
//! * Shuffled: a sample of other images' fixations, `|N| = |P|`.
//! * Farthest neighbor: a sample of the fixations of the `K` images whose
//!   densities correlate least with the query image's density.
//!
//! Shuffled and farthest-neighbor draws pick distinct pixels, each with
//! probability proportional to the number of source fixations on it, so a
//! pixel fixated in many images is as likely as it is in the pooled data.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::index::{sample, sample_weighted};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::density_from_fixations;
use crate::grid::{complement_set, FixationSet, Frame};
use crate::seed;

/// Default number of farthest neighbors.
pub const DEFAULT_K: usize = 5;
/// Default correlation threshold for the fast farthest-neighbor scan.
pub const DEFAULT_CC_THRESHOLD: f64 = 0.0;

const SCAN_STREAM: u64 = 0x5ca7;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub fixations: FixationSet,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, fixations: FixationSet) -> Result<Self> {
        let id = id.into();
        if fixations.is_empty() {
            return Err(Error::EmptyFixations.in_image(&id));
        }
        Ok(ImageRecord { id, fixations })
    }

    pub fn frame(&self) -> Frame {
        self.fixations.frame()
    }
}

/// Images with their fixations, plus the pooled positive set of the dataset.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    name: String,
    sigma: f64,
    images: Vec<ImageRecord>,
    by_id: HashMap<String, usize>,
    pooled: Option<FixationSet>,
}

impl PartialEq for DatasetIndex {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.sigma == other.sigma && self.images == other.images
    }
}

impl DatasetIndex {
    pub fn new(name: impl Into<String>, sigma: f64, images: Vec<ImageRecord>) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidSigma(sigma));
        }
        let mut by_id = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if by_id.insert(img.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(img.id.clone()));
            }
        }
        let pooled = match images.first() {
            Some(first) if images.iter().all(|img| img.frame() == first.frame()) => {
                let frame = first.frame();
                let mut mask = vec![false; frame.len()];
                for img in &images {
                    for p in img.fixations.iter() {
                        mask[frame.index(p)] = true;
                    }
                }
                Some(FixationSet::from_mask(frame, &mask))
            }
            _ => None,
        };
        Ok(DatasetIndex {
            name: name.into(),
            sigma,
            images,
            by_id,
            pooled,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ground-truth blur sigma for this dataset.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownImage(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<&ImageRecord> {
        Ok(&self.images[self.position(id)?])
    }

    /// The frame shared by every image.
    pub fn frame(&self) -> Result<Frame> {
        Ok(self.pooled()?.frame())
    }

    /// Deduplicated union of all fixations.
    pub fn pooled(&self) -> Result<&FixationSet> {
        if self.images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.pooled.as_ref().ok_or(Error::FrameMismatch)
    }
}

/// Per-image densities stored as zero-mean, unit-norm vectors, so the Pearson
/// correlation of two images is a dot product. Correlation rows are computed
/// on first use and cached.
#[derive(Debug)]
pub struct DensityBank {
    sigma: f64,
    standardized: Vec<Vec<f64>>,
    rows: Vec<OnceLock<Vec<f64>>>,
}

impl DensityBank {
    pub fn build(dataset: &DatasetIndex, sigma: f64) -> Result<Self> {
        dataset.frame()?;
        let standardized = dataset
            .images()
            .par_iter()
            .map(|img| {
                let d = density_from_fixations(&img.fixations, sigma).map_err(|e| e.in_image(&img.id))?;
                let mean = d.mean();
                let centered: Vec<f64> = d.values().iter().map(|v| v - mean).collect();
                let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroVariance.in_image(&img.id));
                }
                Ok(centered.into_iter().map(|v| v / norm).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let rows = (0..standardized.len()).map(|_| OnceLock::new()).collect();
        Ok(DensityBank {
            sigma,
            standardized,
            rows,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.standardized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.standardized.is_empty()
    }

    /// Pearson correlation between the densities of images `i` and `j`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }

    /// Correlations of image `i` with every image, in dataset order.
    pub fn row(&self, i: usize) -> &[f64] {
        self.rows[i].get_or_init(|| {
            let a = &self.standardized[i];
            self.standardized
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    #[serde(skip)]
    pub index: usize,
    /// Negated density correlation; larger is farther.
    pub dissimilarity: f64,
}

/// Other images ordered farthest first. Equal dissimilarities are ordered by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NeighborList {
    pub entries: Vec<Neighbor>,
}

impl NeighborList {
    fn from_bank(dataset: &DatasetIndex, bank: &DensityBank, query: usize) -> Self {
        let row = bank.row(query);
        let mut entries: Vec<Neighbor> = dataset
            .images()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != query)
            .map(|(j, img)| Neighbor {
                id: img.id.clone(),
                index: j,
                dissimilarity: -row[j],
            })
            .collect();
        entries.sort_by(|a, b| {
            b.dissimilarity
                .total_cmp(&a.dissimilarity)
                .then_with(|| a.id.cmp(&b.id))
        });
        NeighborList { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|n| n.id.as_str())
    }
}

/// Result of one negative draw.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeDraw {
    pub negatives: FixationSet,
    /// Size of the candidate set the negatives were drawn from.
    pub pool_size: usize,
    /// Set when the candidate pool held fewer points than the positive set,
    /// in which case the whole pool is returned.
    pub undersized: bool,
    /// Neighbor ids used, farthest-neighbor samplers only.
    pub neighbors: Vec<String>,
    /// Images whose correlation was examined by the fast scan.
    pub inspected: usize,
    /// The fast scan found fewer than `K` matches and used the full ranking.
    pub fallback: bool,
}

impl NegativeDraw {
    fn plain(negatives: FixationSet, pool_size: usize) -> Self {
        NegativeDraw {
            negatives,
            pool_size,
            undersized: false,
            neighbors: Vec::new(),
            inspected: 0,
            fallback: false,
        }
    }
}

/// Uniform sample of `amount` points from `pool` without replacement.
fn draw_from(pool: &FixationSet, amount: usize, seed: u64) -> FixationSet {
    let mut rng = seed::rng(seed);
    let picked = sample(&mut rng, pool.len(), amount);
    let points = pool.points();
    FixationSet::new(pool.frame(), picked.iter().map(|i| points[i])).expect("pool points are in bounds")
}

fn exact_cardinality(pool: FixationSet, needed: usize, seed: u64) -> Result<NegativeDraw> {
    if pool.len() < needed {
        return Err(Error::InsufficientNegatives {
            needed,
            available: pool.len(),
        });
    }
    let size = pool.len();
    Ok(NegativeDraw::plain(draw_from(&pool, needed, seed), size))
}

/// All non-fixated pixels of the frame.
pub fn negatives_judd(frame: Frame, positives: &FixationSet) -> FixationSet {
    complement_set(frame, positives)
}

/// `|P|` non-fixated pixels drawn uniformly without replacement.
pub fn negatives_borji(frame: Frame, positives: &FixationSet, seed: u64) -> Result<FixationSet> {
    Ok(exact_cardinality(negatives_judd(frame, positives), positives.len(), seed)?.negatives)
}

/// `|P|` fixations of other images drawn uniformly from `P_all \ P`.
pub fn negatives_shuffled(image_id: &str, dataset: &DatasetIndex, seed: u64) -> Result<FixationSet> {
    let ctx = SamplingContext::new(dataset);
    Ok(Sampler::Shuffled.draw(&ctx, dataset.position(image_id)?, seed)?.negatives)
}

/// Other images ranked by density dissimilarity, farthest first.
pub fn neighbor_ranking(image_id: &str, dataset: &DatasetIndex, sigma: f64) -> Result<NeighborList> {
    let query = dataset.position(image_id)?;
    let bank = DensityBank::build(dataset, sigma)?;
    Ok(NeighborList::from_bank(dataset, &bank, query))
}

pub fn negatives_fn(image_id: &str, dataset: &DatasetIndex, k: usize, sigma: f64, seed: u64) -> Result<NegativeDraw> {
    let ctx = SamplingContext::new(dataset).with_densities(sigma)?;
    Sampler::Fn { k }.draw(&ctx, dataset.position(image_id)?, seed)
}

pub fn negatives_fn_fast(
    image_id: &str,
    dataset: &DatasetIndex,
    k: usize,
    sigma: f64,
    cc_threshold: f64,
    seed: u64,
) -> Result<NegativeDraw> {
    let ctx = SamplingContext::new(dataset).with_densities(sigma)?;
    Sampler::FnFast { k, cc_threshold }.draw(&ctx, dataset.position(image_id)?, seed)
}

/// Distinct candidate pixels with the number of source fixations on each.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    points: FixationSet,
    weights: Vec<u32>,
}

impl CandidatePool {
    /// Fixations of `sources`, minus every pixel fixated in image `query`.
    pub fn build(dataset: &DatasetIndex, query: usize, sources: impl IntoIterator<Item = usize>) -> Result<Self> {
        let frame = dataset.frame()?;
        let mut counts = vec![0u32; frame.len()];
        for j in sources {
            for p in dataset.images()[j].fixations.iter() {
                counts[frame.index(p)] += 1;
            }
        }
        for p in dataset.images()[query].fixations.iter() {
            counts[frame.index(p)] = 0;
        }
        let mask: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
        let points = FixationSet::from_mask(frame, &mask);
        let weights = points.iter().map(|p| counts[frame.index(p)]).collect();
        Ok(CandidatePool { points, weights })
    }

    pub fn points(&self) -> &FixationSet {
        &self.points
    }

    /// Source fixation count per pixel, aligned with `points()`.
    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// Number of distinct pixels.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `amount` distinct pixels, weighted by fixation count, without
    /// replacement.
    pub fn draw(&self, amount: usize, seed: u64) -> FixationSet {
        let mut rng = seed::rng(seed);
        let picked = sample_weighted(&mut rng, self.len(), |i| self.weights[i], amount.min(self.len()))
            .expect("positive integer weights");
        let points = self.points.points();
        FixationSet::new(self.points.frame(), picked.iter().map(|i| points[i])).expect("pool points are in bounds")
    }
}

/// Candidate pool of the farthest-neighbor sampler for the given neighbors.
pub fn fn_candidate_pool(dataset: &DatasetIndex, query: usize, neighbors: &[usize]) -> Result<CandidatePool> {
    CandidatePool::build(dataset, query, neighbors.iter().copied())
}

/// Candidate pool of the shuffled sampler: every other image's fixations.
pub fn shuffled_candidate_pool(dataset: &DatasetIndex, query: usize) -> Result<CandidatePool> {
    CandidatePool::build(dataset, query, (0..dataset.len()).filter(|&j| j != query))
}

/// A dataset together with cached neighbor data, shared by repeated draws.
#[derive(Debug)]
pub struct SamplingContext<'a> {
    dataset: &'a DatasetIndex,
    bank: Option<DensityBank>,
    rankings: Vec<OnceLock<NeighborList>>,
}

impl<'a> SamplingContext<'a> {
    pub fn new(dataset: &'a DatasetIndex) -> Self {
        SamplingContext {
            dataset,
            bank: None,
            rankings: (0..dataset.len()).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Precomputes the per-image densities used by farthest-neighbor sampling.
    pub fn with_densities(mut self, sigma: f64) -> Result<Self> {
        self.bank = Some(DensityBank::build(self.dataset, sigma)?);
        Ok(self)
    }

    pub fn dataset(&self) -> &'a DatasetIndex {
        self.dataset
    }

    pub fn bank(&self) -> Option<&DensityBank> {
        self.bank.as_ref()
    }

    fn require_bank(&self) -> Result<&DensityBank> {
        self.bank.as_ref().ok_or_else(|| {
            Error::InvalidConfig("farthest-neighbor sampling needs densities (with_densities)".into())
        })
    }

    pub fn ranking(&self, query: usize) -> Result<&NeighborList> {
        let bank = self.require_bank()?;
        Ok(self.rankings[query].get_or_init(|| NeighborList::from_bank(self.dataset, bank, query)))
    }
}

/// Negative-set construction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    Judd,
    Borji,
    Shuffled,
    Fn { k: usize },
    FnFast { k: usize, cc_threshold: f64 },
}

impl Sampler {
    pub fn needs_densities(&self) -> bool {
        matches!(self, Sampler::Fn { .. } | Sampler::FnFast { .. })
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            Sampler::Fn { k } | Sampler::FnFast { k, .. } => Some(k),
            _ => None,
        }
    }

    pub fn draw(&self, ctx: &SamplingContext<'_>, query: usize, seed: u64) -> Result<NegativeDraw> {
        let dataset = ctx.dataset();
        let image = dataset
            .images()
            .get(query)
            .ok_or_else(|| Error::UnknownImage(format!("#{query}")))?;
        let positives = &image.fixations;
        match *self {
            Sampler::Judd => {
                let n = negatives_judd(image.frame(), positives);
                let size = n.len();
                Ok(NegativeDraw::plain(n, size))
            }
            Sampler::Borji => exact_cardinality(negatives_judd(image.frame(), positives), positives.len(), seed),
            Sampler::Shuffled => {
                let pool = shuffled_candidate_pool(dataset, query)?;
                if pool.len() < positives.len() {
                    return Err(Error::InsufficientNegatives {
                        needed: positives.len(),
                        available: pool.len(),
                    });
                }
                Ok(NegativeDraw::plain(pool.draw(positives.len(), seed), pool.len()))
            }
            Sampler::Fn { k } => {
                check_k(k, dataset.len())?;
                let chosen: Vec<usize> = ctx.ranking(query)?.entries[..k].iter().map(|n| n.index).collect();
                finish_fn(dataset, query, chosen, seed, dataset.len() - 1, false)
            }
            Sampler::FnFast { k, cc_threshold } => {
                check_k(k, dataset.len())?;
                let row = ctx.require_bank()?.row(query);
                let mut order: Vec<usize> = (0..dataset.len()).filter(|&j| j != query).collect();
                order.shuffle(&mut seed::rng(seed::derive(seed, SCAN_STREAM)));
                let mut chosen = Vec::with_capacity(k);
                let mut inspected = 0;
                for j in order {
                    inspected += 1;
                    if row[j] < cc_threshold {
                        chosen.push(j);
                        if chosen.len() == k {
                            break;
                        }
                    }
                }
                if chosen.len() < k {
                    let full: Vec<usize> = ctx.ranking(query)?.entries[..k].iter().map(|n| n.index).collect();
                    return finish_fn(dataset, query, full, seed, inspected, true);
                }
                finish_fn(dataset, query, chosen, seed, inspected, false)
            }
        }
    }
}

fn check_k(k: usize, n_images: usize) -> Result<()> {
    let max = n_images.saturating_sub(1);
    if k == 0 || k > max {
        return Err(Error::InvalidK { k, max });
    }
    Ok(())
}

fn finish_fn(
    dataset: &DatasetIndex,
    query: usize,
    neighbors: Vec<usize>,
    seed: u64,
    inspected: usize,
    fallback: bool,
) -> Result<NegativeDraw> {
    let pool = fn_candidate_pool(dataset, query, &neighbors)?;
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let wanted = dataset.images()[query].fixations.len();
    let amount = wanted.min(pool.len());
    Ok(NegativeDraw {
        negatives: pool.draw(amount, seed),
        pool_size: pool.len(),
        undersized: pool.len() < wanted,
        neighbors: neighbors.iter().map(|&j| dataset.images()[j].id.clone()).collect(),
        inspected,
        fallback,
    })
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Judd => write!(f, "judd"),
            Sampler::Borji => write!(f, "borji"),
            Sampler::Shuffled => write!(f, "shuffled"),
            Sampler::Fn { k } => write!(f, "fn:{k}"),
            Sampler::FnFast { k, cc_threshold } if *cc_threshold == DEFAULT_CC_THRESHOLD => {
                write!(f, "fn-fast:{k}")
            }
            Sampler::FnFast { k, cc_threshold } => write!(f, "fn-fast:{k}:{cc_threshold}"),
        }
    }
}

impl FromStr for Sampler {
    type Err = Error;

    /// `judd`, `borji`, `shuffled`, `fn[:K]`, `fn-fast[:K[:THRESHOLD]]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownMode(s.to_string());
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let k = match parts.next() {
            Some(v) => v.parse().map_err(|_| bad())?,
            None => DEFAULT_K,
        };
        let sampler = match kind.as_str() {
            "judd" => Sampler::Judd,
            "borji" => Sampler::Borji,
            "shuffled" | "s" => Sampler::Shuffled,
            "fn" => Sampler::Fn { k },
            "fn-fast" => {
                let cc_threshold = match parts.next() {
                    Some(v) => v.parse().map_err(|_| bad())?,
                    None => DEFAULT_CC_THRESHOLD,
                };
                Sampler::FnFast { k, cc_threshold }
            }
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(sampler)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Point;
    use crate::metrics::cc;

    fn frame(w: usize, h: usize) -> Frame {
        Frame::new(w, h).unwrap()
    }

    fn image(id: &str, f: Frame, pts: &[(usize, usize)]) -> ImageRecord {
        ImageRecord::new(id, FixationSet::new(f, pts.iter().map(|&p| Point::from(p))).unwrap()).unwrap()
    }

    fn cluster(cx: usize, cy: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for dy in 0..3 {
            for dx in 0..3 {
                v.push((cx + dx, cy + dy));
            }
        }
        v
    }

    /// Fixation clusters at the left edge, center and right edge of 64x64.
    fn three_way() -> DatasetIndex {
        let f = frame(64, 64);
        DatasetIndex::new(
            "toy",
            3.0,
            vec![
                image("left", f, &cluster(1, 30)),
                image("center", f, &cluster(31, 30)),
                image("right", f, &cluster(60, 30)),
            ],
        )
        .unwrap()
    }

    fn density_cc(ds: &DatasetIndex, a: &str, b: &str, sigma: f64) -> f64 {
        let da = density_from_fixations(&ds.get(a).unwrap().fixations, sigma).unwrap();
        let db = density_from_fixations(&ds.get(b).unwrap().fixations, sigma).unwrap();
        cc(da.grid(), db.grid()).unwrap()
    }

    #[test]
    fn dataset_invariants() {
        let f = frame(8, 8);
        let ds = DatasetIndex::new("t", 2.0, vec![image("a", f, &[(0, 0), (1, 1)]), image("b", f, &[(1, 1), (2, 2)])])
            .unwrap();
        assert_eq!(ds.pooled().unwrap().len(), 3);
        assert!(matches!(
            DatasetIndex::new("t", 2.0, vec![image("a", f, &[(0, 0)]), image("a", f, &[(1, 0)])]),
            Err(Error::DuplicateId(_))
        ));
        assert!(ImageRecord::new("e", FixationSet::empty(f)).is_err());
        let empty = DatasetIndex::new("t", 2.0, vec![]).unwrap();
        assert!(matches!(empty.pooled(), Err(Error::EmptyDataset)));
        assert!(matches!(ds.position("zzz"), Err(Error::UnknownImage(_))));
    }

    #[test]
    fn judd_examples() {
        let f = frame(2, 2);
        let p = FixationSet::new(f, [Point::new(0, 0)]).unwrap();
        assert_eq!(negatives_judd(f, &p).len(), 3);
        let all = FixationSet::new(f, f.points()).unwrap();
        assert!(negatives_judd(f, &all).is_empty());
    }

    #[test]
    fn borji_examples() {
        let f = frame(32, 32);
        let p = FixationSet::new(f, (0..10).map(|i| Point::new(i * 3, i))).unwrap();
        let a = negatives_borji(f, &p, 1).unwrap();
        assert_eq!(a.len(), p.len());
        assert!(a.is_disjoint(&p));
        assert_eq!(a, negatives_borji(f, &p, 1).unwrap());
        // two 10-subsets of 1014 candidates coincide with probability ~1e-23
        assert_ne!(a, negatives_borji(f, &p, 2).unwrap());

        let tiny = frame(2, 1);
        let p = FixationSet::new(tiny, [Point::new(0, 0), Point::new(1, 0)]).unwrap();
        assert!(matches!(
            negatives_borji(tiny, &p, 0),
            Err(Error::InsufficientNegatives { needed: 2, available: 0 })
        ));
    }

    #[test]
    fn shuffled_examples() {
        let f = frame(8, 8);
        let ds = DatasetIndex::new("t", 2.0, vec![image("1", f, &[(0, 0)]), image("2", f, &[(5, 5)])]).unwrap();
        let n = negatives_shuffled("1", &ds, 9).unwrap();
        assert_eq!(n.points(), &[Point::new(5, 5)]);

        let ds = DatasetIndex::new(
            "t",
            2.0,
            vec![image("1", f, &[(0, 0), (1, 0), (2, 0)]), image("2", f, &[(5, 5)])],
        )
        .unwrap();
        assert!(matches!(
            negatives_shuffled("1", &ds, 0),
            Err(Error::InsufficientNegatives { needed: 3, available: 1 })
        ));
    }

    #[test]
    fn ranking_three_way() {
        let ds = three_way();
        let sigma = 3.0;
        let r = neighbor_ranking("left", &ds, sigma).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.ids().all(|id| id != "left"));
        // independent oracle: direct Pearson correlation of the densities
        let to_right = density_cc(&ds, "left", "right", sigma);
        let to_center = density_cc(&ds, "left", "center", sigma);
        let expected_first = if to_right < to_center { "right" } else { "center" };
        assert_eq!(r.entries[0].id, expected_first);
        assert!((r.entries[0].dissimilarity + to_right.min(to_center)).abs() < 1e-12);
        assert!(r.entries[0].dissimilarity >= r.entries[1].dissimilarity);
    }

    #[test]
    fn ranking_identical_images_minimal_dissimilarity() {
        let f = frame(32, 32);
        let ds = DatasetIndex::new(
            "t",
            2.0,
            vec![
                image("a", f, &cluster(4, 4)),
                image("b", f, &cluster(4, 4)),
                image("c", f, &cluster(20, 20)),
            ],
        )
        .unwrap();
        let r = neighbor_ranking("a", &ds, 2.0).unwrap();
        let b = r.entries.iter().find(|n| n.id == "b").unwrap();
        assert!((b.dissimilarity + 1.0).abs() < 1e-12);
        assert_eq!(r.entries.last().unwrap().id, "b");
    }

    #[test]
    fn ranking_ties_ordered_by_id() {
        let f = frame(32, 32);
        let ds = DatasetIndex::new(
            "t",
            2.0,
            vec![image("q", f, &cluster(4, 4)), image("z", f, &cluster(20, 20)), image("m", f, &cluster(20, 20))],
        )
        .unwrap();
        let r = neighbor_ranking("q", &ds, 2.0).unwrap();
        assert_eq!(r.ids().collect::<Vec<_>>(), ["m", "z"]);
    }

    #[test]
    fn fn_three_way() {
        let ds = three_way();
        let far = if density_cc(&ds, "left", "right", 3.0) < density_cc(&ds, "left", "center", 3.0) {
            "right"
        } else {
            "center"
        };
        let far_set = &ds.get(far).unwrap().fixations;
        for seed in 0..5 {
            let d = negatives_fn("left", &ds, 1, 3.0, seed).unwrap();
            assert_eq!(d.neighbors, [far]);
            assert!(d.negatives.iter().all(|p| far_set.contains(p)));
            assert_eq!(d.negatives.len(), 9);
            assert!(d.negatives.is_disjoint(&ds.get("left").unwrap().fixations));
        }
        assert!(matches!(negatives_fn("left", &ds, 0, 3.0, 0), Err(Error::InvalidK { .. })));
        assert!(matches!(negatives_fn("left", &ds, 3, 3.0, 0), Err(Error::InvalidK { k: 3, max: 2 })));
    }

    #[test]
    fn fn_all_neighbors_is_shuffled_pool() {
        let ds = three_way();
        let ctx = SamplingContext::new(&ds).with_densities(3.0).unwrap();
        for q in 0..ds.len() {
            let all: Vec<usize> = ctx.ranking(q).unwrap().entries.iter().map(|n| n.index).collect();
            let pool = fn_candidate_pool(&ds, q, &all).unwrap();
            let support = ds.pooled().unwrap().difference(&ds.images()[q].fixations).unwrap();
            assert_eq!(pool.points(), &support);
            assert_eq!(pool, shuffled_candidate_pool(&ds, q).unwrap());
        }
    }

    #[test]
    fn fn_undersized_pool_flagged() {
        let f = frame(32, 32);
        let ds = DatasetIndex::new(
            "t",
            2.0,
            vec![image("big", f, &cluster(4, 4)), image("small", f, &[(25, 25)]), image("mid", f, &[(15, 15), (16, 15)])],
        )
        .unwrap();
        let d = negatives_fn("big", &ds, 1, 2.0, 0).unwrap();
        assert!(d.undersized);
        assert_eq!(d.negatives.len(), d.pool_size);
        assert!(d.negatives.len() < 9);
    }

    #[test]
    fn fast_accepts_first_match() {
        let ds = three_way();
        let sigma = 3.0;
        // both other images are anticorrelated with "left" (disjoint supports)
        assert!(density_cc(&ds, "left", "right", sigma) < 0.0);
        assert!(density_cc(&ds, "left", "center", sigma) < 0.0);
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..16 {
            let d = negatives_fn_fast("left", &ds, 1, sigma, 0.0, seed).unwrap();
            assert_eq!(d.inspected, 1);
            assert!(!d.fallback);
            seen.insert(d.neighbors[0].clone());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn fast_stops_scanning_once_k_matched() {
        let ds = three_way();
        // threshold between the two correlations admits only the lower one
        let to_right = density_cc(&ds, "left", "right", 3.0);
        let to_center = density_cc(&ds, "left", "center", 3.0);
        let threshold = (to_right + to_center) / 2.0;
        let (lo, _) = if to_right < to_center { ("right", "center") } else { ("center", "right") };
        for seed in 0..8 {
            let d = negatives_fn_fast("left", &ds, 1, 3.0, threshold, seed).unwrap();
            assert_eq!(d.neighbors, [lo]);
        }
    }

    #[test]
    fn fast_unsatisfiable_threshold_matches_exact() {
        let ds = three_way();
        for seed in 0..5 {
            for k in 1..=2 {
                let fast = negatives_fn_fast("center", &ds, k, 3.0, -1.1, seed).unwrap();
                let exact = negatives_fn("center", &ds, k, 3.0, seed).unwrap();
                assert!(fast.fallback);
                assert_eq!(fast.inspected, 2);
                assert_eq!(fast.negatives, exact.negatives);
            }
        }
    }

    #[test]
    fn fast_identical_images_empty_pool() {
        let f = frame(32, 32);
        let ds = DatasetIndex::new(
            "t",
            2.0,
            vec![image("a", f, &cluster(4, 4)), image("b", f, &cluster(4, 4)), image("c", f, &cluster(4, 4))],
        )
        .unwrap();
        assert!(matches!(negatives_fn_fast("a", &ds, 1, 2.0, 0.0, 3), Err(Error::EmptyPool)));
        assert!(matches!(negatives_fn("a", &ds, 2, 2.0, 3), Err(Error::EmptyPool)));
    }

    #[test]
    fn sampler_strings() {
        for s in ["judd", "borji", "shuffled", "fn:5", "fn-fast:3", "fn-fast:3:-0.2"] {
            assert_eq!(s.parse::<Sampler>().unwrap().to_string(), s);
        }
        assert_eq!("fn".parse::<Sampler>().unwrap(), Sampler::Fn { k: DEFAULT_K });
        assert!("fn:x".parse::<Sampler>().is_err());
        assert!("nearest".parse::<Sampler>().is_err());
    }

    #[test]
    fn every_sampler_disjoint_and_deterministic() {
        let ds = three_way();
        let ctx = SamplingContext::new(&ds).with_densities(3.0).unwrap();
        let samplers = [
            Sampler::Judd,
            Sampler::Borji,
            Sampler::Shuffled,
            Sampler::Fn { k: 1 },
            Sampler::Fn { k: 2 },
            Sampler::FnFast { k: 1, cc_threshold: 0.0 },
        ];
        for s in samplers {
            for q in 0..ds.len() {
                let a = s.draw(&ctx, q, 4).unwrap();
                let b = s.draw(&ctx, q, 4).unwrap();
                assert_eq!(a, b);
                assert!(a.negatives.is_disjoint(&ds.images()[q].fixations));
                let mut pts = a.negatives.points().to_vec();
                pts.dedup();
                assert_eq!(pts.len(), a.negatives.len());
            }
        }
    }
}
