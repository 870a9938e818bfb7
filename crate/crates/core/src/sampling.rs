//! Seeded, reproducible tuple collections used by every empirical check.
//!
//! Each random tuple is drawn from its own ChaCha stream (`stream = index`),
//! so tuple `i` depends only on `(seed, i)`. Splitting a set across workers
//! or regenerating a prefix gives bit-identical tuples.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::space::{Carrier, Point};

/// Half-width of the sampling window along unbounded axes.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 10.0;

/// Relative size of the perturbation used for near-equal tuples.
const NEAR_EQUAL_SCALE: f64 = 1e-6;

/// Finite carriers at or below these sizes are checked exhaustively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveBound {
    pub max_points: usize,
    pub max_arity: usize,
}

impl Default for ExhaustiveBound {
    fn default() -> Self {
        ExhaustiveBound {
            max_points: 12,
            max_arity: 4,
        }
    }
}

impl ExhaustiveBound {
    pub fn admits(&self, carrier: &Carrier, t: usize) -> bool {
        carrier
            .len()
            .is_some_and(|n| n <= self.max_points && t <= self.max_arity)
    }
}

/// A collection of equal-width point tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    width: usize,
    tuples: Vec<Vec<Point>>,
    exhaustive: bool,
}

/// Draws tuples from a carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampler {
    pub seed: u64,
    /// Window half-width used on unbounded axes.
    pub radius: f64,
    /// Inject near-equal tuples on continuous carriers.
    pub near_equal: bool,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            seed,
            radius: DEFAULT_SAMPLE_RADIUS,
            near_equal: true,
        }
    }

    /// Turns near-equal injection on or off. Ratios of distances between
    /// nearly coincident points carry large relative rounding error, so
    /// classification samples usually leave them out.
    pub fn with_near_equal(mut self, on: bool) -> Self {
        self.near_equal = on;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn window(&self, lo: f64, hi: f64) -> (f64, f64) {
        let r = self.radius;
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (false, true) => (hi - 2.0 * r, hi),
            (true, false) => (lo, lo + 2.0 * r),
            (false, false) => (-r, r),
        }
    }

    fn draw(&self, carrier: &Carrier, rng: &mut ChaCha8Rng) -> Point {
        match carrier {
            Carrier::Box { lo, hi } => Point::new(
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| {
                        let (l, h) = self.window(l, h);
                        (l + (h - l) * rng.gen::<f64>()).clamp(l, h)
                    })
                    .collect(),
            ),
            Carrier::Finite { n } => Point::index(rng.gen_range(0..*n)),
        }
    }

    /// Moves `p` by a tiny amount along its first axis, staying in the box.
    fn nudge(&self, carrier: &Carrier, p: &Point) -> Point {
        let Carrier::Box { lo, hi } = carrier else {
            return p.clone();
        };
        let mut c = p.coords().to_vec();
        let (l, h) = self.window(lo[0], hi[0]);
        let step = NEAR_EQUAL_SCALE * (h - l).max(1.0);
        c[0] = if c[0] + step <= h { c[0] + step } else { c[0] - step };
        Point::new(c)
    }

    /// `n` uniformly random tuples of the given width, followed by injected
    /// degenerate tuples: all-equal, two-equal, repeated-first and (on
    /// continuous carriers) near-equal.
    pub fn tuples(&self, carrier: &Carrier, width: usize, n: usize) -> Result<SampleSet> {
        if width == 0 {
            return Err(usage("tuple width must be positive"));
        }
        let mut tuples: Vec<Vec<Point>> = (0..n as u64)
            .map(|i| {
                let mut rng = self.rng(i);
                (0..width).map(|_| self.draw(carrier, &mut rng)).collect()
            })
            .collect();

        if width > 1 {
            let per_kind = (n / 50).max(4);
            for k in 0..per_kind as u64 {
                let mut rng = self.rng(n as u64 + k);
                let x = self.draw(carrier, &mut rng);
                let y = self.draw(carrier, &mut rng);
                let z = self.draw(carrier, &mut rng);

                tuples.push(vec![x.clone(); width]);

                let mut two_equal: Vec<Point> =
                    (0..width).map(|_| self.draw(carrier, &mut rng)).collect();
                two_equal[1] = two_equal[0].clone();
                tuples.push(two_equal);

                let mut rep_form = vec![x.clone(); width];
                rep_form[width - 1] = y;
                tuples.push(rep_form);

                if self.near_equal && !carrier.is_finite() {
                    let mut near = vec![z.clone(); width];
                    near[width - 1] = self.nudge(carrier, &z);
                    tuples.push(near);
                }
            }
        }

        Ok(SampleSet {
            width,
            tuples,
            exhaustive: false,
        })
    }

    /// Tuples for a check over `t`-ary space: exhaustive when the carrier is
    /// finite and within `bound`, random otherwise.
    pub fn tuples_for(
        &self,
        carrier: &Carrier,
        t: usize,
        width: usize,
        n: usize,
        bound: ExhaustiveBound,
    ) -> Result<SampleSet> {
        if bound.admits(carrier, t) {
            SampleSet::exhaustive(carrier, width)
        } else {
            self.tuples(carrier, width, n)
        }
    }

    /// `n` random single points.
    pub fn points(&self, carrier: &Carrier, n: usize) -> Vec<Point> {
        (0..n as u64)
            .map(|i| self.draw(carrier, &mut self.rng(i)))
            .collect()
    }
}

impl SampleSet {
    pub fn from_tuples(tuples: Vec<Vec<Point>>) -> Result<Self> {
        let width = tuples.first().map(Vec::len).unwrap_or(0);
        if tuples.iter().any(|t| t.len() != width) {
            return Err(usage("all tuples in a sample set must have the same width"));
        }
        Ok(SampleSet {
            width,
            tuples,
            exhaustive: false,
        })
    }

    /// Every `width`-tuple over a finite carrier.
    pub fn exhaustive(carrier: &Carrier, width: usize) -> Result<Self> {
        let n = carrier
            .len()
            .ok_or_else(|| usage("exhaustive sampling needs a finite carrier"))?;
        let values: Vec<Point> = (0..n).map(Point::index).collect();
        let mut set = SampleSet::product(&values, width)?;
        set.exhaustive = true;
        Ok(set)
    }

    /// Cartesian power of an explicit point list, e.g. a rational grid.
    pub fn product(values: &[Point], width: usize) -> Result<Self> {
        if values.is_empty() || width == 0 {
            return Err(usage("product needs at least one value and positive width"));
        }
        let total = values
            .len()
            .checked_pow(width as u32)
            .filter(|&c| c <= 50_000_000)
            .ok_or_else(|| usage("product sample set is too large"))?;
        let mut tuples = Vec::with_capacity(total);
        let mut idx = vec![0usize; width];
        for _ in 0..total {
            tuples.push(idx.iter().map(|&i| values[i].clone()).collect());
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < values.len() {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(SampleSet {
            width,
            tuples,
            exhaustive: false,
        })
    }

    /// Marks the set as covering its whole domain.
    pub fn mark_exhaustive(mut self) -> Self {
        self.exhaustive = true;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn tuples(&self) -> &[Vec<Point>] {
        &self.tuples
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Point]> {
        self.tuples.iter().map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_tuples() {
        let c = Carrier::real(1).unwrap();
        let a = Sampler::new(7).tuples(&c, 3, 100).unwrap();
        let b = Sampler::new(7).tuples(&c, 3, 100).unwrap();
        assert_eq!(a, b);
        let other = Sampler::new(8).tuples(&c, 3, 100).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn prefix_is_stable() {
        let c = Carrier::real(2).unwrap();
        let small = Sampler::new(1).tuples(&c, 2, 10).unwrap();
        let large = Sampler::new(1).tuples(&c, 2, 500).unwrap();
        assert_eq!(&small.tuples()[..10], &large.tuples()[..10]);
    }

    #[test]
    fn degenerate_tuples_are_injected() {
        let c = Carrier::real(1).unwrap();
        let s = Sampler::new(3).tuples(&c, 4, 200).unwrap();
        assert!(s.iter().any(|t| t.iter().all(|p| p == &t[0])));
        assert!(s.iter().any(|t| t[0] == t[1] && t[1] != t[3]));
    }

    #[test]
    fn draws_stay_in_carrier() {
        let c = Carrier::new_box(vec![-1.0, 2.0], vec![1.0, 2.5]).unwrap();
        let s = Sampler::new(11).tuples(&c, 3, 300).unwrap();
        assert!(s.iter().flatten().all(|p| c.contains(p)));
        let f = Carrier::finite(5).unwrap();
        let s = Sampler::new(11).tuples(&f, 3, 300).unwrap();
        assert!(s.iter().flatten().all(|p| f.contains(p)));
    }

    #[test]
    fn exhaustive_counts() {
        let c = Carrier::finite(4).unwrap();
        let s = SampleSet::exhaustive(&c, 3).unwrap();
        assert_eq!(s.len(), 64);
        assert!(s.is_exhaustive());
        assert!(SampleSet::exhaustive(&Carrier::real(1).unwrap(), 2).is_err());
    }

    #[test]
    fn bound_gates_exhaustive_mode() {
        let b = ExhaustiveBound::default();
        assert!(b.admits(&Carrier::finite(12).unwrap(), 4));
        assert!(!b.admits(&Carrier::finite(13).unwrap(), 3));
        assert!(!b.admits(&Carrier::finite(5).unwrap(), 5));
    }
}
