//! The A-metric space abstraction: a `t`-argument distance over a carrier set.
//!
//! A space carries three contracts that the rest of the crate relies on but
//! never assumes blindly:
//!
//! * (A1) `A(x_1, ..., x_t) >= 0`;
//! * (A2) `A(x_1, ..., x_t) = 0` iff all arguments coincide;
//! * (A3) `A(x_1, ..., x_t) <= sum_i A(x_i, ..., x_i, y)` for every `y`.
//!
//! They are verified empirically by [`crate::check`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Default coordinate-wise equality threshold for points.
pub const DEFAULT_EQ_TOL: f64 = 1e-12;

/// Number of arguments of the distance function. Always at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Arity(usize);

impl Arity {
    pub fn new(t: usize) -> Result<Self> {
        if t < 2 {
            return Err(usage(format!("arity must be at least 2, got {t}")));
        }
        Ok(Arity(t))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// `t` as a float, for use in the contraction formulas.
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<usize> for Arity {
    type Error = Error;

    fn try_from(t: usize) -> Result<Self> {
        Arity::new(t)
    }
}

impl From<Arity> for usize {
    fn from(a: Arity) -> usize {
        a.0
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of a carrier set.
///
/// Continuous carriers use the coordinates directly. Finite carriers store the
/// point's index as a single coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn index(i: usize) -> Self {
        Point(vec![i as f64])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Index of a finite-carrier point. `None` if the coordinate is not a
    /// nonnegative integer.
    pub fn as_index(&self) -> Option<usize> {
        match self.0.as_slice() {
            [v] if *v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Some(*v as usize),
            _ => None,
        }
    }

    /// Largest coordinate-wise absolute difference. Infinite on a dimension mismatch.
    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        if self.0.len() != other.0.len() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Point, eq_tol: f64) -> bool {
        self.max_abs_diff(other) <= eq_tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::scalar(x)
    }
}

/// The point set a space is defined over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Carrier {
    /// Closed axis-aligned box `[lo, hi]` in `R^d`. Bounds may be infinite,
    /// in which case the box is the whole of `R^d` along that axis.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// The index set `{0, 1, ..., n - 1}`.
    Finite { n: usize },
}

impl Carrier {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(usage(format!(
                "box bounds must be nonempty and of equal length, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (k, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || !(l < h) {
                return Err(usage(format!("box axis {k}: need lo < hi, got [{l}, {h}]")));
            }
        }
        Ok(Carrier::Box { lo, hi })
    }

    /// The whole of `R^d`.
    pub fn real(d: usize) -> Result<Self> {
        Carrier::new_box(vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d])
    }

    pub fn finite(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(usage("finite carrier must have at least one point"));
        }
        Ok(Carrier::Finite { n })
    }

    pub fn dim(&self) -> usize {
        match self {
            Carrier::Box { lo, .. } => lo.len(),
            Carrier::Finite { .. } => 1,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Carrier::Finite { .. })
    }

    /// Number of points of a finite carrier.
    pub fn len(&self) -> Option<usize> {
        match self {
            Carrier::Finite { n } => Some(*n),
            Carrier::Box { .. } => None,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Carrier::Box { lo, hi } => {
                p.dim() == lo.len()
                    && p.coords()
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(x, (l, h))| x.is_finite() && *l <= *x && *x <= *h)
            }
            Carrier::Finite { n } => p.as_index().is_some_and(|i| i < *n),
        }
    }

    /// Every point of a finite carrier, in index order.
    pub fn points(&self) -> Option<Vec<Point>> {
        self.len().map(|n| (0..n).map(Point::index).collect())
    }
}

type TupleFn = dyn Fn(&[&Point]) -> f64 + Send + Sync;
type PairFn = dyn Fn(&Point, &Point) -> f64 + Send + Sync;

/// How a space turns a tuple of points into a number.
#[derive(Clone)]
pub(crate) enum Kernel {
    /// `sum_{i<j} ||x_i - x_j||_1`.
    PairwiseAbsdiff,
    /// `sum_{i<j} table[x_i][x_j]` over a finite index carrier.
    LiftedTable(Arc<Vec<Vec<f64>>>),
    /// `sum_{i<j} base(x_i, x_j)` for a callable base metric.
    LiftedFn(Arc<PairFn>),
    /// An arbitrary tuple function; no structure is assumed.
    Custom(Arc<TupleFn>),
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::PairwiseAbsdiff => f.write_str("PairwiseAbsdiff"),
            Kernel::LiftedTable(t) => write!(f, "LiftedTable({}x{})", t.len(), t.len()),
            Kernel::LiftedFn(_) => f.write_str("LiftedFn"),
            Kernel::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn l1(a: &Point, b: &Point) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).sum()
}

fn sum_over_pairs(points: &[&Point], base: impl Fn(&Point, &Point) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, x) in points.iter().enumerate() {
        for y in &points[i + 1..] {
            total += base(x, y);
        }
    }
    total
}

impl Kernel {
    fn apply(&self, points: &[&Point]) -> f64 {
        match self {
            Kernel::PairwiseAbsdiff => sum_over_pairs(points, l1),
            Kernel::LiftedTable(table) => sum_over_pairs(points, |x, y| {
                // Carrier membership is enforced by `eval`; unchecked callers
                // get NaN rather than a panic for out-of-range indices.
                match (x.as_index(), y.as_index()) {
                    (Some(i), Some(j)) if i < table.len() && j < table.len() => table[i][j],
                    _ => f64::NAN,
                }
            }),
            Kernel::LiftedFn(base) => sum_over_pairs(points, |x, y| base(x, y)),
            Kernel::Custom(f) => f(points),
        }
    }
}

/// A set with a `t`-argument distance function.
///
/// Spaces are immutable and cheap to clone; the distance is a pure function
/// and can be called from any number of threads.
#[derive(Debug, Clone)]
pub struct AMetricSpace {
    arity: Arity,
    carrier: Carrier,
    eq_tol: f64,
    kernel: Kernel,
    label: String,
}

impl AMetricSpace {
    pub(crate) fn from_kernel(
        arity: Arity,
        carrier: Carrier,
        kernel: Kernel,
        label: impl Into<String>,
    ) -> Self {
        AMetricSpace {
            arity,
            carrier,
            eq_tol: DEFAULT_EQ_TOL,
            kernel,
            label: label.into(),
        }
    }

    /// Wraps an arbitrary distance function. Nothing about it is verified;
    /// run [`crate::check::check_axioms`] before trusting the result.
    pub fn from_fn<F>(arity: Arity, carrier: Carrier, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[&Point]) -> f64 + Send + Sync + 'static,
    {
        Self::from_kernel(arity, carrier, Kernel::Custom(Arc::new(f)), label)
    }

    pub fn with_eq_tol(mut self, eq_tol: f64) -> Self {
        self.eq_tol = eq_tol.max(0.0);
        self
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn t(&self) -> usize {
        self.arity.get()
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn eq_tol(&self) -> f64 {
        self.eq_tol
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Raw distance of a tuple. No arity or carrier checks.
    pub fn distance(&self, points: &[&Point]) -> f64 {
        self.kernel.apply(points)
    }

    /// Two-point reduction `A(x, ..., x, y)` with `x` repeated `t - 1` times.
    /// No carrier checks.
    pub fn rep(&self, x: &Point, y: &Point) -> f64 {
        let mut tuple: Vec<&Point> = vec![x; self.t() - 1];
        tuple.push(y);
        self.distance(&tuple)
    }

    pub fn points_equal(&self, x: &Point, y: &Point) -> bool {
        x.approx_eq(y, self.eq_tol)
    }

    fn check_member(&self, p: &Point) -> Result<()> {
        if self.carrier.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideCarrier {
                point: p.coords().to_vec(),
            })
        }
    }

    /// Checked evaluation of the distance on a `t`-tuple.
    pub fn eval(&self, points: &[Point]) -> Result<f64> {
        if points.len() != self.t() {
            return Err(usage(format!(
                "expected {} points, got {}",
                self.t(),
                points.len()
            )));
        }
        for p in points {
            self.check_member(p)?;
        }
        let refs: Vec<&Point> = points.iter().collect();
        Ok(self.distance(&refs))
    }

    /// Checked `A(x, ..., x, y)`.
    pub fn rep_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_member(x)?;
        self.check_member(y)?;
        Ok(self.rep(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::make_absdiff_space;

    fn line(t: usize) -> AMetricSpace {
        make_absdiff_space(Arity::new(t).unwrap(), 1, None).unwrap()
    }

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter().copied().map(Point::scalar).collect()
    }

    #[test]
    fn arity_below_two_is_rejected() {
        assert!(Arity::new(1).is_err());
        assert!(Arity::new(0).is_err());
        assert_eq!(Arity::new(2).unwrap().get(), 2);
    }

    #[test]
    fn eval_hand_values() {
        assert_eq!(line(3).eval(&pts(&[0.0, 1.0, 2.0])).unwrap(), 4.0);
        assert_eq!(line(2).eval(&pts(&[3.0, 7.0])).unwrap(), 4.0);
        assert_eq!(line(4).eval(&pts(&[2.5; 4])).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_wrong_arity() {
        let err = line(3).eval(&pts(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn eval_rejects_points_outside_box() {
        let s = make_absdiff_space(
            Arity::new(2).unwrap(),
            1,
            Some((vec![0.0], vec![1.0])),
        )
        .unwrap();
        let err = s.eval(&pts(&[0.5, 1.5])).unwrap_err();
        assert_eq!(err, Error::OutsideCarrier { point: vec![1.5] });
    }

    #[test]
    fn rep_distance_hand_values() {
        let s3 = line(3);
        assert_eq!(s3.rep_distance(&0.0.into(), &5.0.into()).unwrap(), 10.0);
        let s5 = line(5);
        assert_eq!(s5.rep_distance(&1.0.into(), &2.0.into()).unwrap(), 4.0);
        assert_eq!(s5.rep_distance(&3.0.into(), &3.0.into()).unwrap(), 0.0);
    }

    #[test]
    fn finite_carrier_membership() {
        let c = Carrier::finite(3).unwrap();
        assert!(c.contains(&Point::index(2)));
        assert!(!c.contains(&Point::index(3)));
        assert!(!c.contains(&Point::scalar(0.5)));
        assert!(!c.contains(&Point::new(vec![0.0, 1.0])));
    }

    #[test]
    fn box_validation() {
        assert!(Carrier::new_box(vec![1.0], vec![1.0]).is_err());
        assert!(Carrier::new_box(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Carrier::real(2).unwrap().contains(&Point::new(vec![-1e9, 3.0])));
    }
}
