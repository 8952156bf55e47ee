//! Tie-breaking for quantized predictions.
//!
//! Both strategies add `eps * F` to the prediction, where `F` is either the
//! global Gaussian field or uniform noise. `eps` is half the smallest gap
//! between distinct prediction values divided by the range of `F`, so any two
//! pixels that were strictly ordered stay strictly ordered.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::global_gaussian_map;
use crate::grid::GridMap;
use crate::seed;

/// Smallest positive difference between distinct values, `None` for a
/// constant map.
pub fn smallest_gap(map: &GridMap) -> Option<f64> {
    let mut v = map.values().to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
}

/// Scale applied to a jitter field with the given range.
pub fn jitter_scale(pred: &GridMap, field: &GridMap) -> f64 {
    let range = field.max() - field.min();
    match smallest_gap(pred) {
        Some(gap) if range > 0.0 => gap / (2.0 * range),
        Some(_) => 0.0,
        None => 1.0,
    }
}

fn jitter(pred: &GridMap, field: &GridMap) -> Result<GridMap> {
    pred.add_scaled(field, jitter_scale(pred, field))
}

/// Adds a scaled global Gaussian field so that tied values become distinct.
/// Deterministic.
pub fn tie_break_global(pred: &GridMap) -> Result<GridMap> {
    pred.ensure_non_negative()?;
    jitter(pred, &global_gaussian_map(pred.frame()))
}

/// Uniform-noise baseline, `O ~ U(0, 1)` per pixel.
pub fn tie_break_noise(pred: &GridMap, seed: u64) -> Result<GridMap> {
    let mut rng = seed::rng(seed);
    let noise = GridMap::new(
        pred.width(),
        pred.height(),
        (0..pred.len()).map(|_| rng.random::<f64>()).collect(),
    )?;
    jitter(pred, &noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Global,
    Noise,
    Off,
}

impl TieBreak {
    /// Applies the strategy; `seed` is used only by [`TieBreak::Noise`].
    pub fn apply(&self, pred: &GridMap, seed: u64) -> Result<GridMap> {
        match self {
            TieBreak::Global => tie_break_global(pred),
            TieBreak::Noise => tie_break_noise(pred, seed),
            TieBreak::Off => Ok(pred.clone()),
        }
    }
}

impl std::fmt::Display for TieBreak {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TieBreak::Global => "global",
            TieBreak::Noise => "noise",
            TieBreak::Off => "off",
        })
    }
}

impl std::str::FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(TieBreak::Global),
            "noise" => Ok(TieBreak::Noise),
            "off" | "none" => Ok(TieBreak::Off),
            _ => Err(Error::UnknownMode(s.to_string())),
        }
    }
}
