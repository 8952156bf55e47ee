//! Map and fixation types, and conversions between the matrix, coordinate-set
//! and density views of the same ground truth.
//!
//! Coordinates are `(x = column, y = row)` with the origin at the top-left
//! pixel. Map storage is row-major.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unit-mass check on densities.
pub const DENSITY_TOLERANCE: f64 = 1e-9;
const BINARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(Frame { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn index(&self, p: Point) -> usize {
        p.y * self.width + p.x
    }

    pub fn point(&self, index: usize) -> Point {
        Point::new(index % self.width, index / self.width)
    }

    /// All pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Pixel coordinate. Ordering is row-major (by `y`, then `x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub const fn new(x: usize, y: usize) -> Self {
        Point { x, y }
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<(usize, usize)> for Point {
    fn from((x, y): (usize, usize)) -> Self {
        Point { x, y }
    }
}

/// Dense 2D map of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    frame: Frame,
    values: Vec<f64>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let frame = Frame::new(width, height)?;
        if values.len() != frame.len() {
            return Err(Error::LengthMismatch {
                expected: frame.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(GridMap { frame, values })
    }

    /// Builds a map from nested rows (`rows[y][x]`).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(width * height);
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        GridMap::new(width, height, values)
    }

    pub fn filled(frame: Frame, value: f64) -> Self {
        GridMap {
            frame,
            values: vec![value; frame.len()],
        }
    }

    pub fn zeros(frame: Frame) -> Self {
        GridMap::filled(frame, 0.0)
    }

    pub fn from_fn(frame: Frame, mut f: impl FnMut(Point) -> f64) -> Result<Self> {
        let values = frame.points().map(&mut f).collect();
        GridMap::new(frame.width, frame.height, values)
    }

    /// Wraps values already known to be finite with the right length.
    pub(crate) fn from_parts(frame: Frame, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), frame.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        GridMap { frame, values }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.frame.width + x]
    }

    pub fn at(&self, p: Point) -> f64 {
        self.get(p.x, p.y)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.len() as f64;
        var.sqrt()
    }

    /// Index and value of the first maximal pixel.
    pub fn argmax(&self) -> Point {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        self.frame.point(best)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridMap> {
        GridMap::new(self.width(), self.height(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise `self + scale * other`.
    pub fn add_scaled(&self, other: &GridMap, scale: f64) -> Result<GridMap> {
        ensure_same_frame(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        GridMap::new(self.width(), self.height(), values)
    }

    pub fn ensure_non_negative(&self) -> Result<()> {
        match self.values.iter().position(|&v| v < 0.0) {
            Some(index) => Err(Error::NegativeValue {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }
}

pub(crate) fn ensure_same_frame(a: &GridMap, b: &GridMap) -> Result<()> {
    if a.frame != b.frame {
        return Err(Error::DimensionMismatch {
            left: a.frame.to_string(),
            right: b.frame.to_string(),
        });
    }
    Ok(())
}

/// Deduplicated, in-bounds set of pixel coordinates over a frame.
///
/// Points are kept sorted in row-major order, so iteration order is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixationSet {
    frame: Frame,
    points: Vec<Point>,
}

impl FixationSet {
    pub fn new(frame: Frame, points: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut points: Vec<Point> = points.into_iter().collect();
        if let Some(p) = points.iter().find(|p| !frame.contains(**p)) {
            return Err(Error::OutOfBounds {
                x: p.x,
                y: p.y,
                width: frame.width,
                height: frame.height,
            });
        }
        points.sort_unstable();
        points.dedup();
        Ok(FixationSet { frame, points })
    }

    pub fn empty(frame: Frame) -> Self {
        FixationSet {
            frame,
            points: Vec::new(),
        }
    }

    /// `points` must already be sorted, deduplicated and in bounds.
    pub(crate) fn from_sorted(frame: Frame, points: Vec<Point>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(points.iter().all(|p| frame.contains(*p)));
        FixationSet { frame, points }
    }

    pub(crate) fn from_mask(frame: Frame, mask: &[bool]) -> Self {
        let points = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| frame.point(i))
            .collect();
        FixationSet::from_sorted(frame, points)
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = Point> + '_ {
        self.points.iter().copied()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.points.binary_search(&p).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.frame.len()];
        for p in &self.points {
            mask[self.frame.index(*p)] = true;
        }
        mask
    }

    pub fn is_disjoint(&self, other: &FixationSet) -> bool {
        self.points.iter().all(|p| !other.contains(*p))
    }

    /// Union with another set over the same frame.
    pub fn union(&self, other: &FixationSet) -> Result<FixationSet> {
        self.check_frame(other)?;
        let mut points = Vec::with_capacity(self.len() + other.len());
        points.extend_from_slice(&self.points);
        points.extend_from_slice(&other.points);
        points.sort_unstable();
        points.dedup();
        Ok(FixationSet::from_sorted(self.frame, points))
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &FixationSet) -> Result<FixationSet> {
        self.check_frame(other)?;
        let points = self
            .points
            .iter()
            .copied()
            .filter(|p| !other.contains(*p))
            .collect();
        Ok(FixationSet::from_sorted(self.frame, points))
    }

    fn check_frame(&self, other: &FixationSet) -> Result<()> {
        if self.frame != other.frame {
            return Err(Error::DimensionMismatch {
                left: self.frame.to_string(),
                right: other.frame.to_string(),
            });
        }
        Ok(())
    }
}

/// A non-negative map summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap(GridMap);

impl DensityMap {
    /// Validates an existing grid as a density without rescaling it.
    pub fn try_from_grid(grid: GridMap) -> Result<Self> {
        grid.ensure_non_negative()?;
        let sum = grid.sum();
        if (sum - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(DensityMap(grid))
    }

    pub fn grid(&self) -> &GridMap {
        &self.0
    }

    pub fn into_grid(self) -> GridMap {
        self.0
    }
}

impl Deref for DensityMap {
    type Target = GridMap;

    fn deref(&self) -> &GridMap {
        &self.0
    }
}

impl AsRef<GridMap> for DensityMap {
    fn as_ref(&self) -> &GridMap {
        &self.0
    }
}

/// Binary fixation map with ones at each fixation.
pub fn vectorize(fixations: &FixationSet) -> GridMap {
    let frame = fixations.frame();
    let mut values = vec![0.0; frame.len()];
    for p in fixations.iter() {
        values[frame.index(p)] = 1.0;
    }
    GridMap::from_parts(frame, values)
}

/// Inverse of [`vectorize`]: the coordinates where a binary map equals one.
pub fn fixations_from_map(map: &GridMap) -> Result<FixationSet> {
    let frame = map.frame();
    let mut mask = vec![false; frame.len()];
    for (i, &v) in map.values().iter().enumerate() {
        if (v - 1.0).abs() <= BINARY_TOLERANCE {
            mask[i] = true;
        } else if v.abs() > BINARY_TOLERANCE {
            let p = frame.point(i);
            return Err(Error::NonBinaryMap { x: p.x, y: p.y, value: v });
        }
    }
    Ok(FixationSet::from_mask(frame, &mask))
}

pub fn normalize_to_density(map: &GridMap) -> Result<DensityMap> {
    map.ensure_non_negative()?;
    let sum = map.sum();
    if sum <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let values = map.values().iter().map(|v| v / sum).collect();
    Ok(DensityMap(GridMap::from_parts(map.frame(), values)))
}

/// All pixels of `frame` that are not in `exclude`.
pub fn complement_set(frame: Frame, exclude: &FixationSet) -> FixationSet {
    let mask: Vec<bool> = if exclude.frame() == frame {
        exclude.mask().into_iter().map(|m| !m).collect()
    } else {
        let mut mask = vec![true; frame.len()];
        for p in exclude.iter().filter(|p| frame.contains(*p)) {
            mask[frame.index(p)] = false;
        }
        mask
    };
    FixationSet::from_mask(frame, &mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(w: usize, h: usize) -> Frame {
        Frame::new(w, h).unwrap()
    }

    fn set(f: Frame, pts: &[(usize, usize)]) -> FixationSet {
        FixationSet::new(f, pts.iter().map(|&p| Point::from(p))).unwrap()
    }

    #[test]
    fn vectorize_examples() {
        let m = vectorize(&set(frame(3, 3), &[(1, 1)]));
        let mut expected = vec![0.0; 9];
        expected[4] = 1.0;
        assert_eq!(m.values(), expected.as_slice());

        assert!(vectorize(&FixationSet::empty(frame(2, 2))).values().iter().all(|&v| v == 0.0));

        let m = vectorize(&set(frame(2, 2), &[(0, 0), (1, 1)]));
        assert_eq!(m, GridMap::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap());
    }

    #[test]
    fn fixations_from_map_examples() {
        let m = GridMap::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let f = fixations_from_map(&m).unwrap();
        assert_eq!(f.points(), &[Point::new(0, 0), Point::new(1, 1)]);

        let zero = GridMap::zeros(frame(4, 3));
        assert!(fixations_from_map(&zero).unwrap().is_empty());

        let bad = GridMap::from_rows(&[[0.5, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(fixations_from_map(&bad), Err(Error::NonBinaryMap { .. })));
    }

    #[test]
    fn normalize_examples() {
        let d = normalize_to_density(&GridMap::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(d.values(), &[0.25; 4]);

        let d = normalize_to_density(&GridMap::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0, 0.0, 0.0]);

        let input = [1.0, 3.0, 0.0, 0.0];
        let sum: f64 = input.iter().sum();
        let oracle: Vec<f64> = input.iter().map(|v| v / sum).collect();
        let d = normalize_to_density(&GridMap::new(2, 2, input.to_vec()).unwrap()).unwrap();
        assert_eq!(d.values(), oracle.as_slice());
        assert_eq!(d.values(), &[0.25, 0.75, 0.0, 0.0]);
    }

    #[test]
    fn normalize_errors() {
        assert!(matches!(
            normalize_to_density(&GridMap::zeros(frame(2, 2))),
            Err(Error::ZeroMass)
        ));
        let neg = GridMap::from_rows(&[[1.0, -0.5]]).unwrap();
        assert!(matches!(normalize_to_density(&neg), Err(Error::NegativeValue { index: 1, .. })));
    }

    #[test]
    fn complement_examples() {
        let c = complement_set(frame(2, 2), &set(frame(2, 2), &[(0, 0)]));
        assert_eq!(c.points(), &[Point::new(1, 0), Point::new(0, 1), Point::new(1, 1)]);

        assert!(complement_set(frame(1, 1), &set(frame(1, 1), &[(0, 0)])).is_empty());

        let c = complement_set(frame(2, 1), &FixationSet::empty(frame(2, 1)));
        assert_eq!(c.points(), &[Point::new(0, 0), Point::new(1, 0)]);
    }

    #[test]
    fn construction_validates() {
        assert!(Frame::new(0, 3).is_err());
        assert!(GridMap::new(2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(
            GridMap::new(1, 2, vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            FixationSet::new(frame(2, 2), [Point::new(2, 0)]),
            Err(Error::OutOfBounds { .. })
        ));
        let dup = set(frame(3, 3), &[(1, 2), (1, 2), (0, 0)]);
        assert_eq!(dup.len(), 2);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMap::try_from_grid(GridMap::filled(frame(2, 2), 0.25)).is_ok());
        assert!(matches!(
            DensityMap::try_from_grid(GridMap::filled(frame(2, 2), 0.3)),
            Err(Error::NotNormalized { .. })
        ));
    }

    fn binary_map() -> impl Strategy<Value = GridMap> {
        (1usize..=16, 1usize..=16).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::ANY, w * h).prop_map(move |bits| {
                GridMap::new(w, h, bits.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
                    .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn vectorize_round_trip(map in binary_map()) {
            let back = vectorize(&fixations_from_map(&map).unwrap());
            prop_assert_eq!(back, map);
        }

        #[test]
        fn normalize_idempotent(values in proptest::collection::vec(0.0f64..10.0, 1..64)) {
            prop_assume!(values.iter().sum::<f64>() > 0.0);
            let n = values.len();
            let d = normalize_to_density(&GridMap::new(n, 1, values).unwrap()).unwrap();
            let again = normalize_to_density(d.grid()).unwrap();
            for (a, b) in d.values().iter().zip(again.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!((d.sum() - 1.0).abs() <= DENSITY_TOLERANCE);
        }

        #[test]
        fn complement_partitions(map in binary_map()) {
            let exclude = fixations_from_map(&map).unwrap();
            let f = exclude.frame();
            let comp = complement_set(f, &exclude);
            prop_assert!(comp.is_disjoint(&exclude));
            prop_assert_eq!(comp.len() + exclude.len(), f.len());
            let all = comp.union(&exclude).unwrap();
            prop_assert_eq!(all.len(), f.len());
        }
    }
}
