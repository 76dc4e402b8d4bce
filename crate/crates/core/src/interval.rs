//! Interval vectors, sign splits of matrices, and linear-map bounding.
//!
//! Everything downstream (decomposition functions, the learner, the observer)
//! consumes boxes through this module. A box is a pair `lower <= upper`; point
//! boxes are legal and represent exactly known quantities.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

/// Bound violations up to this size are treated as floating-point noise and
/// clamped to the midpoint. Anything larger is rejected.
pub const ORDER_SLACK: f64 = 1e-12;

/// An axis-aligned box `[lower, upper]` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl IntervalVector {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim("interval bounds", lower.len(), upper.len())?;
        let (mut lower, mut upper) = (lower, upper);
        for i in 0..lower.len() {
            let (l, u) = (lower[i], upper[i]);
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite interval bound at component {i}: [{l}, {u}]"
                )));
            }
            if l > u {
                if l - u > ORDER_SLACK {
                    return Err(Error::InvalidInput(format!(
                        "interval component {i} has lower {l} > upper {u}"
                    )));
                }
                let mid = 0.5 * (l + u);
                lower[i] = mid;
                upper[i] = mid;
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
        )
    }

    /// Degenerate box `[v, v]`.
    pub fn point(v: DVector<f64>) -> Self {
        Self {
            lower: v.clone(),
            upper: v,
        }
    }

    /// Box `[-r, r]` in every coordinate.
    pub fn symmetric(radius: &[f64]) -> Result<Self> {
        let lo: Vec<f64> = radius.iter().map(|r| -r).collect();
        Self::from_slices(&lo, radius)
    }

    pub fn empty_dim() -> Self {
        Self::point(DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn into_bounds(self) -> (DVector<f64>, DVector<f64>) {
        (self.lower, self.upper)
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn width(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    /// Center and width of the box.
    pub fn midpoint_width(&self) -> (DVector<f64>, DVector<f64>) {
        (self.center(), self.width())
    }

    pub fn contains(&self, z: &DVector<f64>, slack: f64) -> bool {
        z.len() == self.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] - slack <= z[i] && z[i] <= self.upper[i] + slack)
    }

    /// True when `other` lies inside `self` up to `slack` per component.
    pub fn contains_box(&self, other: &IntervalVector, slack: f64) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                self.lower[i] - slack <= other.lower[i] && other.upper[i] <= self.upper[i] + slack
            })
    }

    /// Intersection, or `None` when the boxes are disjoint in some coordinate.
    pub fn intersect(&self, other: &IntervalVector) -> Option<IntervalVector> {
        if other.dim() != self.dim() {
            return None;
        }
        let lower = self.lower.zip_map(&other.lower, f64::max);
        let upper = self.upper.zip_map(&other.upper, f64::min);
        IntervalVector::new(lower, upper).ok()
    }

    /// Sub-box of the selected coordinates.
    pub fn rows(&self, range: Range<usize>) -> IntervalVector {
        let n = range.len();
        IntervalVector {
            lower: self.lower.rows(range.start, n).into_owned(),
            upper: self.upper.rows(range.start, n).into_owned(),
        }
    }

    /// Cartesian product `self x other`.
    pub fn concat(&self, other: &IntervalVector) -> IntervalVector {
        let stack = |a: &DVector<f64>, b: &DVector<f64>| {
            DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
        };
        IntervalVector {
            lower: stack(&self.lower, &other.lower),
            upper: stack(&self.upper, &other.upper),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BoundsRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Serialize for IntervalVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BoundsRepr {
            lower: self.lower.iter().copied().collect(),
            upper: self.upper.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = BoundsRepr::deserialize(d)?;
        IntervalVector::from_slices(&repr.lower, &repr.upper).map_err(serde::de::Error::custom)
    }
}

/// `M = positive - negative` with both parts elementwise nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSplitMatrix {
    pub positive: DMatrix<f64>,
    pub negative: DMatrix<f64>,
}

impl SignSplitMatrix {
    /// Elementwise absolute value `M+ + M-`.
    pub fn abs(&self) -> DMatrix<f64> {
        &self.positive + &self.negative
    }

    pub fn recombine(&self) -> DMatrix<f64> {
        &self.positive - &self.negative
    }

    /// `[M+ lo - M- hi, M+ hi - M- lo]` without re-checking dimensions.
    pub(crate) fn apply(
        &self,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let lower = &self.positive * lo - &self.negative * hi;
        let upper = &self.positive * hi - &self.negative * lo;
        (lower, upper)
    }
}

pub fn split_pos_neg(m: &DMatrix<f64>) -> Result<SignSplitMatrix> {
    if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "matrix entry {bad} is not finite"
        )));
    }
    Ok(split_unchecked(m))
}

pub(crate) fn split_unchecked(m: &DMatrix<f64>) -> SignSplitMatrix {
    let positive = m.map(|v| v.max(0.0));
    let negative = &positive - m;
    SignSplitMatrix { positive, negative }
}

pub(crate) fn abs_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(f64::abs)
}

/// Encloses `{ A x : x in box }` as `[A+ lo - A- hi, A+ hi - A- lo]`.
pub fn bound_linear_map(a: &DMatrix<f64>, bx: &IntervalVector) -> Result<IntervalVector> {
    check_dim("bound_linear_map columns", bx.dim(), a.ncols())?;
    let split = split_pos_neg(a)?;
    let (lower, upper) = split.apply(bx.lower(), bx.upper());
    IntervalVector::new(lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn corners(bx: &IntervalVector) -> Vec<DVector<f64>> {
        let n = bx.dim();
        (0..1usize << n)
            .map(|mask| {
                DVector::from_fn(n, |i, _| {
                    if mask >> i & 1 == 1 {
                        bx.upper()[i]
                    } else {
                        bx.lower()[i]
                    }
                })
            })
            .collect()
    }

    #[test]
    fn split_simple_row() {
        let s = split_pos_neg(&dmatrix![1.0, -2.0]).unwrap();
        assert_eq!(s.positive, dmatrix![1.0, 0.0]);
        assert_eq!(s.negative, dmatrix![0.0, 2.0]);
    }

    #[test]
    fn split_zero() {
        let s = split_pos_neg(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(s.positive, DMatrix::zeros(3, 2));
        assert_eq!(s.negative, DMatrix::zeros(3, 2));
    }

    #[test]
    fn split_rejects_nan() {
        assert!(matches!(
            split_pos_neg(&dmatrix![1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn interval_order_slack() {
        let clamped = IntervalVector::from_slices(&[1.0 + 5e-13], &[1.0]).unwrap();
        assert_eq!(clamped.lower()[0], clamped.upper()[0]);
        assert!(IntervalVector::from_slices(&[1.0 + 1e-9], &[1.0]).is_err());
        assert!(IntervalVector::from_slices(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn identity_map_is_exact() {
        let bx = IntervalVector::from_slices(&[-1.0, 0.5, 2.0], &[3.0, 0.5, 4.0]).unwrap();
        let out = bound_linear_map(&DMatrix::identity(3, 3), &bx).unwrap();
        assert_eq!(out, bx);
    }

    #[test]
    fn one_row_hand_computation() {
        let bx = IntervalVector::from_slices(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let out = bound_linear_map(&dmatrix![1.0, -1.0], &bx).unwrap();
        assert_eq!(out.lower()[0], -1.0);
        assert_eq!(out.upper()[0], 1.0);
    }

    #[test]
    fn bound_rejects_dimension_mismatch() {
        let bx = IntervalVector::from_slices(&[0.0], &[1.0]).unwrap();
        assert!(matches!(
            bound_linear_map(&DMatrix::zeros(2, 3), &bx),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn midpoint_width_basic() {
        let (c, w) = IntervalVector::from_slices(&[0.0], &[1.0])
            .unwrap()
            .midpoint_width();
        assert_eq!((c[0], w[0]), (0.5, 1.0));
        let (c, w) = IntervalVector::point(DVector::from_element(1, 2.5)).midpoint_width();
        assert_eq!((c[0], w[0]), (2.5, 0.0));
    }

    fn arb_box(n: usize) -> impl Strategy<Value = IntervalVector> {
        proptest::collection::vec((-10.0..10.0f64, 0.0..5.0f64), n).prop_map(|v| {
            let lo: Vec<f64> = v.iter().map(|(a, _)| *a).collect();
            let hi: Vec<f64> = v.iter().map(|(a, w)| a + w).collect();
            IntervalVector::from_slices(&lo, &hi).unwrap()
        })
    }

    proptest! {
        #[test]
        fn split_reconstructs(entries in proptest::collection::vec(-100.0..100.0f64, 25)) {
            let m = DMatrix::from_vec(5, 5, entries);
            let s = split_pos_neg(&m).unwrap();
            prop_assert!(s.positive.iter().all(|v| *v >= 0.0));
            prop_assert!(s.negative.iter().all(|v| *v >= 0.0));
            prop_assert_eq!(s.recombine(), m.clone());
            prop_assert_eq!(s.abs(), m.map(f64::abs));
        }

        #[test]
        fn linear_bound_equals_corner_hull(
            entries in proptest::collection::vec(-3.0..3.0f64, 12),
            bx in arb_box(4),
        ) {
            let a = DMatrix::from_vec(3, 4, entries);
            let out = bound_linear_map(&a, &bx).unwrap();
            let images: Vec<DVector<f64>> = corners(&bx).iter().map(|c| &a * c).collect();
            for i in 0..3 {
                let lo = images.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                let hi = images.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!((out.lower()[i] - lo).abs() <= 1e-12 * (1.0 + lo.abs()));
                prop_assert!((out.upper()[i] - hi).abs() <= 1e-12 * (1.0 + hi.abs()));
            }
        }

        #[test]
        fn nonnegative_map_uses_endpoints(
            entries in proptest::collection::vec(0.0..3.0f64, 6),
            bx in arb_box(3),
        ) {
            let a = DMatrix::from_vec(2, 3, entries);
            let out = bound_linear_map(&a, &bx).unwrap();
            prop_assert_eq!(out.lower(), &(&a * bx.lower()));
            prop_assert_eq!(out.upper(), &(&a * bx.upper()));
        }

        #[test]
        fn midpoint_reconstruction(bx in arb_box(6)) {
            let (c, w) = bx.midpoint_width();
            for i in 0..6 {
                prop_assert!(w[i] >= 0.0);
                prop_assert!((c[i] - 0.5 * w[i] - bx.lower()[i]).abs() <= 1e-12);
                prop_assert!((c[i] + 0.5 * w[i] - bx.upper()[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sampled_points_stay_inside_linear_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-2.0..2.0));
        let bx = IntervalVector::from_slices(&[-1.0, 0.0, 2.0], &[0.5, 3.0, 2.5]).unwrap();
        let out = bound_linear_map(&a, &bx).unwrap();
        let mut violations = 0;
        for _ in 0..10_000 {
            let x = DVector::from_fn(3, |i, _| rng.random_range(bx.lower()[i]..=bx.upper()[i]));
            if !out.contains(&(&a * x), 1e-12) {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }
}
