//! Gaussian fields: the 2D kernel, separable blurring, fixation densities,
//! the global tie-breaking map and the synthetic center-bias map.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{normalize_to_density, vectorize, DensityMap, FixationSet, Frame, GridMap};
use crate::sampling::DatasetIndex;

/// Sigma used for datasets without a published value, and for synthetic data.
pub const DEFAULT_SIGMA: f64 = 19.0;

/// Default center-bias spread as a fraction of each frame dimension.
pub const CENTER_BIAS_FRACTION: f64 = 0.25;

/// Sub-pixel offset of the global map's center. Irrational so that no two
/// pixels sit at exactly the same anisotropic radius.
const GLOBAL_CENTER_OFFSET: (f64, f64) = (
    (std::f64::consts::SQRT_2 - 1.0) / 2.0,
    (1.732_050_807_568_877_2 - 1.0) / 2.0,
);

/// Ground-truth blur sigma for the well-known fixation datasets.
pub fn dataset_sigma(name: &str) -> Option<f64> {
    match name.to_ascii_lowercase().as_str() {
        "toronto" => Some(20.0),
        "mit1003" => Some(24.0),
        "cat2000" => Some(41.0),
        "salicon" => Some(19.0),
        _ => None,
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

/// Truncation radius of the kernel: `ceil(3 sigma)`.
pub fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Axis-aligned Gaussian evaluated per pixel, unnormalized (peak 1 at the
/// continuous center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub center: (f64, f64),
}

impl GaussianParams {
    pub fn new(sigma_x: f64, sigma_y: f64, center: (f64, f64)) -> Result<Self> {
        check_sigma(sigma_x)?;
        check_sigma(sigma_y)?;
        Ok(GaussianParams {
            sigma_x,
            sigma_y,
            center,
        })
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (-(dx * dx / (2.0 * self.sigma_x * self.sigma_x)
            + dy * dy / (2.0 * self.sigma_y * self.sigma_y)))
            .exp()
    }

    pub fn field(&self, frame: Frame) -> GridMap {
        let values = frame
            .points()
            .map(|p| self.value(p.x as f64, p.y as f64))
            .collect();
        GridMap::from_parts(frame, values)
    }
}

/// Square kernel `g(m, n) = exp(-(m^2 + n^2) / (2 sigma^2)) / (2 pi sigma^2)`
/// of side `2 ceil(3 sigma) + 1`, evaluated directly in 2D.
pub fn gaussian_kernel(sigma: f64) -> Result<GridMap> {
    check_sigma(sigma)?;
    let r = kernel_radius(sigma);
    let side = 2 * r + 1;
    let norm = 1.0 / (2.0 * PI * sigma * sigma);
    let frame = Frame::new(side, side)?;
    let values = frame
        .points()
        .map(|p| {
            let m = p.x as f64 - r as f64;
            let n = p.y as f64 - r as f64;
            norm * (-(m * m + n * n) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    Ok(GridMap::from_parts(frame, values))
}

/// One factor of the separable kernel; its outer product is [`gaussian_kernel`].
fn kernel_1d(sigma: f64) -> Vec<f64> {
    let r = kernel_radius(sigma) as isize;
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    (-r..=r)
        .map(|d| {
            let d = d as f64;
            norm * (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Separable Gaussian convolution, truncated at `ceil(3 sigma)` with zero
/// padding. Rows are processed in parallel; each output pixel is summed in a
/// fixed order so the result does not depend on the thread count.
pub fn blur(map: &GridMap, sigma: f64) -> Result<GridMap> {
    check_sigma(sigma)?;
    let kernel = kernel_1d(sigma);
    let r = kernel_radius(sigma) as isize;
    let (w, h) = (map.width(), map.height());
    let src = map.values();

    let mut horizontal = vec![0.0; w * h];
    horizontal
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            let input = &src[y * w..(y + 1) * w];
            for (x, out) in row.iter_mut().enumerate() {
                let lo = (x as isize - r).max(0) as usize;
                let hi = (x as isize + r).min(w as isize - 1) as usize;
                let mut acc = 0.0;
                for (sx, v) in input.iter().enumerate().take(hi + 1).skip(lo) {
                    acc += kernel[(sx as isize - x as isize + r) as usize] * v;
                }
                *out = acc;
            }
        });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let lo = (y as isize - r).max(0) as usize;
        let hi = (y as isize + r).min(h as isize - 1) as usize;
        for sy in lo..=hi {
            let k = kernel[(sy as isize - y as isize + r) as usize];
            let input = &horizontal[sy * w..(sy + 1) * w];
            for (o, v) in row.iter_mut().zip(input) {
                *o += k * v;
            }
        }
    });

    Ok(GridMap::from_parts(map.frame(), out))
}

/// Blurred, unit-mass fixation map.
pub fn density_from_fixations(fixations: &FixationSet, sigma: f64) -> Result<DensityMap> {
    check_sigma(sigma)?;
    if fixations.is_empty() {
        return Err(Error::EmptyFixations);
    }
    normalize_to_density(&blur(&vectorize(fixations), sigma)?)
}

/// Density of the pooled, deduplicated fixations of a whole dataset.
pub fn aggregate_density(dataset: &DatasetIndex, sigma: f64) -> Result<DensityMap> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    density_from_fixations(dataset.pooled()?, sigma)
}

/// Wide Gaussian covering the whole frame, used to break ties in quantized
/// predictions. `sigma_x = width / 4`, `sigma_y = height / 4`, centered just
/// off the frame center and scaled to a peak of 1.
pub fn global_gaussian_map(frame: Frame) -> GridMap {
    let params = GaussianParams {
        sigma_x: frame.width as f64 / 4.0,
        sigma_y: frame.height as f64 / 4.0,
        center: (
            (frame.width as f64 - 1.0) / 2.0 + GLOBAL_CENTER_OFFSET.0,
            (frame.height as f64 - 1.0) / 2.0 + GLOBAL_CENTER_OFFSET.1,
        ),
    };
    let field = params.field(frame);
    let peak = field.max();
    let values = field.into_values().into_iter().map(|v| v / peak).collect();
    GridMap::from_parts(frame, values)
}

/// Centered Gaussian density with `sigma = fraction * dimension` on each axis.
pub fn center_bias_map(frame: Frame, sigma_fraction: f64) -> Result<DensityMap> {
    if !(sigma_fraction > 0.0 && sigma_fraction <= 1.0) {
        return Err(Error::InvalidSigmaFraction(sigma_fraction));
    }
    let params = GaussianParams::new(
        sigma_fraction * frame.width as f64,
        sigma_fraction * frame.height as f64,
        (
            (frame.width as f64 - 1.0) / 2.0,
            (frame.height as f64 - 1.0) / 2.0,
        ),
    )?;
    normalize_to_density(&params.field(frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Point;
    use crate::sampling::ImageRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame(w: usize, h: usize) -> Frame {
        Frame::new(w, h).unwrap()
    }

    /// Direct 2D convolution with the Gaussian kernel, zero padded.
    fn dense_convolve(map: &GridMap, sigma: f64) -> GridMap {
        let k = gaussian_kernel(sigma).unwrap();
        let r = kernel_radius(sigma) as isize;
        let (w, h) = (map.width() as isize, map.height() as isize);
        GridMap::from_fn(map.frame(), |p| {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (sx, sy) = (p.x as isize + dx, p.y as isize + dy);
                    if sx >= 0 && sy >= 0 && sx < w && sy < h {
                        acc += k.get((dx + r) as usize, (dy + r) as usize)
                            * map.get(sx as usize, sy as usize);
                    }
                }
            }
            acc
        })
        .unwrap()
    }

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GridMap {
        GridMap::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k = gaussian_kernel(1.0).unwrap();
        assert_eq!(k.width(), 7);
        assert!((k.get(3, 3) - 0.159_154_9).abs() < 1e-7);
        assert!((k.get(3, 3) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((k.get(4, 3) - 0.096_532_4).abs() < 1e-7);
        for s in [0.5, 1.0, 2.5, 4.0] {
            let k = gaussian_kernel(s).unwrap();
            assert_eq!(k.width(), 2 * kernel_radius(s) + 1);
            for i in 0..k.width() {
                for j in 0..k.width() {
                    assert_eq!(k.get(i, j), k.get(j, i));
                    assert_eq!(k.get(i, j), k.get(k.width() - 1 - j, i));
                }
            }
        }
    }

    #[test]
    fn invalid_sigma() {
        assert!(matches!(gaussian_kernel(0.0), Err(Error::InvalidSigma(_))));
        assert!(matches!(blur(&GridMap::zeros(frame(3, 3)), -1.0), Err(Error::InvalidSigma(_))));
        assert!(blur(&GridMap::zeros(frame(3, 3)), f64::NAN).is_err());
    }

    #[test]
    fn blur_of_delta_is_kernel() {
        let f = frame(31, 29);
        let (cx, cy) = (15, 14);
        let delta = vectorize(&FixationSet::new(f, [Point::new(cx, cy)]).unwrap());
        let out = blur(&delta, 2.0).unwrap();
        let k = gaussian_kernel(2.0).unwrap();
        for dy in 0..13 {
            for dx in 0..13 {
                let v = out.get(cx + dx - 6, cy + dy - 6);
                assert!((v - k.get(dx, dy)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blur_of_zero_is_zero() {
        let out = blur(&GridMap::zeros(frame(9, 5)), 3.0).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn blur_preserves_mass_for_interior_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma = 2.0;
        let kernel_mass = gaussian_kernel(sigma).unwrap().sum();
        // support confined to the central 4x4 block keeps the 13x13 kernel inside 16x16
        let f = frame(16, 16);
        let map = GridMap::from_fn(f, |p| {
            if (6..10).contains(&p.x) && (6..10).contains(&p.y) {
                rng.random::<f64>()
            } else {
                0.0
            }
        })
        .unwrap();
        let dense = dense_convolve(&map, sigma);
        let out = blur(&map, sigma).unwrap();
        assert!((out.sum() - map.sum() * kernel_mass).abs() < 1e-9);
        assert!((out.sum() - dense.sum()).abs() < 1e-9);
    }

    #[test]
    fn blur_matches_dense_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for sigma in [1.0, 2.0, 4.0] {
            for _ in 0..5 {
                let map = random_map(&mut rng, 16, 16);
                let a = blur(&map, sigma).unwrap();
                let b = dense_convolve(&map, sigma);
                for (x, y) in a.values().iter().zip(b.values()) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn blur_rectangular_and_tiny_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (w, h) in [(1, 1), (1, 7), (9, 2), (5, 13)] {
            let map = random_map(&mut rng, w, h);
            let a = blur(&map, 1.5).unwrap();
            let b = dense_convolve(&map, 1.5);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn density_single_fixation_peaks_there() {
        let f = frame(40, 30);
        let p = Point::new(20, 15);
        let d = density_from_fixations(&FixationSet::new(f, [p]).unwrap(), 3.0).unwrap();
        assert_eq!(d.argmax(), p);
        assert!((d.sum() - 1.0).abs() < 1e-9);
        assert!(matches!(
            density_from_fixations(&FixationSet::empty(f), 3.0),
            Err(Error::EmptyFixations)
        ));
    }

    #[test]
    fn density_opposite_corners_symmetric() {
        let f = frame(64, 64);
        let fix = FixationSet::new(f, [Point::new(0, 0), Point::new(63, 63)]).unwrap();
        let d = density_from_fixations(&fix, 3.0).unwrap();
        // dense-convolution oracle, normalized
        let dense = dense_convolve(&vectorize(&fix), 3.0);
        let s = dense.sum();
        for (a, b) in d.values().iter().zip(dense.values()) {
            assert!((a - b / s).abs() < 1e-12);
        }
        let (a, b) = (d.get(0, 0), d.get(63, 63));
        assert!((a - b).abs() < 1e-9);
        // both corners are local maxima
        assert!(a > d.get(1, 0) && a > d.get(0, 1) && a > d.get(1, 1));
        assert!(b > d.get(62, 63) && b > d.get(63, 62) && b > d.get(62, 62));
    }

    #[test]
    fn density_translation_equivariant() {
        let f = frame(48, 48);
        let sigma = 2.0;
        let base = [Point::new(15, 16), Point::new(19, 20), Point::new(22, 14)];
        let (dx, dy) = (5, 3);
        let shifted: Vec<Point> = base.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect();
        let a = density_from_fixations(&FixationSet::new(f, base).unwrap(), sigma).unwrap();
        let b = density_from_fixations(&FixationSet::new(f, shifted).unwrap(), sigma).unwrap();
        for y in 0..f.height - dy {
            for x in 0..f.width - dx {
                assert!((a.get(x, y) - b.get(x + dx, y + dy)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn aggregate_density_examples() {
        let f = frame(32, 32);
        let fix = FixationSet::new(f, [Point::new(3, 4), Point::new(20, 21)]).unwrap();
        let one = DatasetIndex::new(
            "toy",
            DEFAULT_SIGMA,
            vec![ImageRecord::new("a", fix.clone()).unwrap()],
        )
        .unwrap();
        let single = density_from_fixations(&fix, 4.0).unwrap();
        assert_eq!(aggregate_density(&one, 4.0).unwrap(), single);

        let two = DatasetIndex::new(
            "toy",
            DEFAULT_SIGMA,
            vec![
                ImageRecord::new("a", fix.clone()).unwrap(),
                ImageRecord::new("b", fix.clone()).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(aggregate_density(&two, 4.0).unwrap(), single);

        let other = FixationSet::new(frame(16, 16), [Point::new(1, 1)]).unwrap();
        let mixed = DatasetIndex::new(
            "toy",
            DEFAULT_SIGMA,
            vec![
                ImageRecord::new("a", fix).unwrap(),
                ImageRecord::new("b", other).unwrap(),
            ],
        )
        .unwrap();
        assert!(matches!(aggregate_density(&mixed, 4.0), Err(Error::FrameMismatch)));
    }

    #[test]
    fn global_map_properties() {
        for (w, h) in [(2, 2), (7, 3), (64, 48), (33, 65)] {
            let f = frame(w, h);
            let g = global_gaussian_map(f);
            assert!(g.values().iter().all(|&v| v > 0.0 && v <= 1.0));
            assert_eq!(g.max(), 1.0);
            let c = g.argmax();
            // monotone decrease along axis rays leaving the peak
            for x in c.x + 1..w {
                assert!(g.get(x, c.y) < g.get(x - 1, c.y));
            }
            for x in (0..c.x).rev() {
                assert!(g.get(x, c.y) < g.get(x + 1, c.y));
            }
            for y in c.y + 1..h {
                assert!(g.get(c.x, y) < g.get(c.x, y - 1));
            }
            for y in (0..c.y).rev() {
                assert!(g.get(c.x, y) < g.get(c.x, y + 1));
            }
        }
    }

    #[test]
    fn global_map_distinct_values_480x640() {
        for (w, h) in [(640, 480), (480, 640)] {
            let g = global_gaussian_map(frame(w, h));
            let mut v = g.values().to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            let fraction = v.len() as f64 / (w * h) as f64;
            assert!(fraction >= 1.0 - 1e-6, "distinct fraction {fraction}");
        }
    }

    #[test]
    fn center_bias_examples() {
        let f = frame(100, 100);
        let cb = center_bias_map(f, CENTER_BIAS_FRACTION).unwrap();
        assert!((cb.sum() - 1.0).abs() < 1e-9);
        let peak = cb.max();
        for p in [Point::new(49, 49), Point::new(50, 49), Point::new(49, 50), Point::new(50, 50)] {
            assert!((cb.at(p) - peak).abs() < 1e-18);
        }
        // central pixels sit half a pixel off the continuous center
        let d2 = 2.0 * (49.5f64.powi(2) - 0.5f64.powi(2));
        let expected = (d2 / (2.0 * 25.0 * 25.0)).exp();
        let ratio = cb.get(49, 49) / cb.get(0, 0);
        assert!((ratio / expected - 1.0).abs() < 1e-9);
        assert!(ratio > 50.0);

        let odd = center_bias_map(frame(9, 7), 0.25).unwrap();
        assert_eq!(odd.argmax(), Point::new(4, 3));
        assert!(center_bias_map(f, 0.0).is_err());
        assert!(center_bias_map(f, 1.5).is_err());
    }

    #[test]
    fn published_sigmas() {
        assert_eq!(dataset_sigma("Toronto"), Some(20.0));
        assert_eq!(dataset_sigma("MIT1003"), Some(24.0));
        assert_eq!(dataset_sigma("CAT2000"), Some(41.0));
        assert_eq!(dataset_sigma("SALICON"), Some(19.0));
        assert_eq!(dataset_sigma("mine"), None);
    }
}
