//! Saliency map evaluation against eye-fixation ground truth.
//!
//! The crate covers the usual metric family (CC, NSS, SIM, KLD, IG and the
//! AUC variants), the negative-set samplers behind AUC-Judd, AUC-Borji,
//! shuffled AUC and farthest-neighbor AUC, a tie-breaking field for quantized
//! predictions, negative-set quality measures, and a synthetic fixation
//! generator used to exercise all of it at desk scale.
//!
//! Maps are dense [`GridMap`]s of `f64`, fixations are deduplicated
//! [`FixationSet`]s of pixel coordinates, and a [`DensityMap`] is a grid known
//! to sum to one.

pub mod error;
pub mod gaussian;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod quality;
pub mod roc;
pub mod sampling;
pub mod seed;
pub mod smoothing;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{DensityMap, FixationSet, Frame, GridMap, Point};
pub use metrics::{MetricConfig, MetricKind, MetricReport, TieBreak};
pub use sampling::{DatasetIndex, ImageRecord, Sampler};
