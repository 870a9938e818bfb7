//! Empirical verification of the A-metric axioms and the two-point lemmas.
//!
//! Every check walks a [`SampleSet`], evaluates both sides of an inequality
//! per instance and collects a [`CheckReport`]. Instances are independent, so
//! they may be evaluated in parallel; results are merged in sample order and
//! the report is identical either way.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::sampling::{ExhaustiveBound, SampleSet, Sampler};
use crate::space::{AMetricSpace, Point};

/// Default absolute tolerance, scaled by `1 + magnitude` per instance.
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;

/// Violations kept verbatim in a report; the rest are only counted.
pub const MAX_RECORDED_VIOLATIONS: usize = 64;

/// Inequality tolerance `abs * (1 + max(|lhs|, |rhs|))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: DEFAULT_CHECK_TOL,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64) -> Self {
        Tolerance { abs: abs.max(0.0) }
    }

    pub fn scaled(&self, lhs: f64, rhs: f64) -> f64 {
        self.abs * (1.0 + lhs.abs().max(rhs.abs()))
    }
}

/// What a violation points at: concrete points, or positions in a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Points(Vec<Vec<f64>>),
    Indices(Vec<usize>),
}

impl Witness {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        Witness::Points(points.into_iter().map(|p| p.coords().to_vec()).collect())
    }

    /// The witness points, if this is a point witness.
    pub fn points(&self) -> Option<Vec<Point>> {
        match self {
            Witness::Points(p) => Some(p.iter().cloned().map(Point::new).collect()),
            Witness::Indices(_) => None,
        }
    }
}

/// One failed instance: `lhs <= rhs` did not hold within `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub witness: Witness,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; always greater than `tol`.
    pub gap: f64,
    pub tol: f64,
}

/// Outcome of one check over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub checked: usize,
    pub violations: Vec<Violation>,
    /// Total violations, including those beyond the recorded ones.
    pub violation_count: usize,
    /// Largest `lhs - rhs` seen; negative means every instance had slack.
    pub max_gap: f64,
    pub passed: bool,
    pub exhaustive: bool,
    /// Named side measurements (satisfaction rates and the like).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

impl CheckReport {
    /// Combines reports of the same check computed over disjoint samples.
    pub fn merge(name: impl Into<String>, reports: impl IntoIterator<Item = CheckReport>) -> Self {
        let mut tally = Tally::default();
        let mut exhaustive = true;
        let mut any = false;
        for r in reports {
            any = true;
            exhaustive &= r.exhaustive;
            tally.checked += r.checked;
            tally.violation_count += r.violation_count;
            tally.max_gap = tally.max_gap.max(r.max_gap);
            for v in r.violations {
                if tally.violations.len() < MAX_RECORDED_VIOLATIONS {
                    tally.violations.push(v);
                }
            }
        }
        tally.into_report(name, exhaustive && any)
    }

    /// First recorded witness, if any.
    pub fn first_witness(&self) -> Option<&Witness> {
        self.violations.first().map(|v| &v.witness)
    }
}

/// Running accumulator for a check.
#[derive(Debug, Clone)]
pub struct Tally {
    checked: usize,
    violations: Vec<Violation>,
    violation_count: usize,
    max_gap: f64,
}

impl Default for Tally {
    fn default() -> Self {
        Tally {
            checked: 0,
            violations: Vec::new(),
            violation_count: 0,
            max_gap: f64::NEG_INFINITY,
        }
    }
}

impl Tally {
    /// Records `lhs <= rhs + tol`. The witness is only built on failure.
    pub fn record(
        &mut self,
        rule: &str,
        lhs: f64,
        rhs: f64,
        tol: f64,
        witness: impl FnOnce() -> Witness,
    ) {
        self.checked += 1;
        let gap = if lhs.is_nan() || rhs.is_nan() {
            f64::INFINITY
        } else {
            lhs - rhs
        };
        self.max_gap = self.max_gap.max(gap);
        if gap > tol {
            self.violation_count += 1;
            if self.violations.len() < MAX_RECORDED_VIOLATIONS {
                self.violations.push(Violation {
                    rule: rule.to_string(),
                    witness: witness(),
                    lhs,
                    rhs,
                    gap,
                    tol,
                });
            }
        }
    }

    pub fn absorb(&mut self, other: Tally) {
        self.checked += other.checked;
        self.violation_count += other.violation_count;
        self.max_gap = self.max_gap.max(other.max_gap);
        let room = MAX_RECORDED_VIOLATIONS.saturating_sub(self.violations.len());
        self.violations.extend(other.violations.into_iter().take(room));
    }

    pub fn into_report(self, name: impl Into<String>, exhaustive: bool) -> CheckReport {
        CheckReport {
            name: name.into(),
            checked: self.checked,
            passed: self.violation_count == 0,
            violations: self.violations,
            violation_count: self.violation_count,
            max_gap: if self.checked == 0 { 0.0 } else { self.max_gap },
            exhaustive,
            metrics: BTreeMap::new(),
        }
    }
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Runs `per_tuple` over every tuple and folds the tallies in order.
pub(crate) fn sweep<F>(samples: &SampleSet, per_tuple: F) -> Tally
where
    F: Fn(&[Point], &mut Tally) + Sync + Send,
{
    let parts = map_ordered(samples.tuples(), |tuple| {
        let mut local = Tally::default();
        per_tuple(tuple, &mut local);
        local
    });
    let mut total = Tally::default();
    for part in parts {
        total.absorb(part);
    }
    total
}

pub(crate) fn ensure_members(space: &AMetricSpace, samples: &SampleSet) -> Result<()> {
    for p in samples.iter().flatten() {
        if !space.carrier().contains(p) {
            return Err(Error::OutsideCarrier {
                point: p.coords().to_vec(),
            });
        }
    }
    Ok(())
}

fn max_separation(points: &[&Point]) -> f64 {
    let mut sep: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            sep = sep.max(a.max_abs_diff(b));
        }
    }
    sep
}

/// Checks (A1), (A2) and (A3).
///
/// `samples` must have width `t + 1`: the first `t` entries form the tuple and
/// the last is the pivot `y` of (A3). A1 and A2 are checked on the tuple part.
/// A2 is tested in both directions: an all-equal tuple must have distance
/// within tolerance of zero, and a tuple with (near-)zero distance must have
/// all its points within `eq_tol` of each other.
pub fn check_axioms(space: &AMetricSpace, samples: &SampleSet, tol: Tolerance) -> Result<CheckReport> {
    let t = space.t();
    if samples.is_empty() {
        return Err(usage("check_axioms needs a nonempty sample set"));
    }
    if samples.width() != t + 1 {
        return Err(usage(format!(
            "check_axioms needs tuples of width t + 1 = {}, got {}",
            t + 1,
            samples.width()
        )));
    }
    ensure_members(space, samples)?;
    let eq_tol = space.eq_tol();

    let tally = sweep(samples, |tuple, tally| {
        let (xs, pivot) = tuple.split_at(t);
        let y = &pivot[0];
        let refs: Vec<&Point> = xs.iter().collect();
        let d = space.distance(&refs);
        let witness = || Witness::from_points(xs);

        // A1: 0 <= d
        tally.record("A1", 0.0, d, tol.scaled(0.0, d), witness);

        // A2, both directions.
        let sep = max_separation(&refs);
        if sep <= eq_tol {
            tally.record("A2", d, 0.0, tol.scaled(d, 0.0), witness);
        } else if d <= tol.scaled(d, 0.0) {
            let bound = eq_tol.max(tol.scaled(d, 0.0));
            tally.record("A2", sep, bound, 0.0, witness);
        }

        // A3: A(x_1..x_t) <= sum_i A(x_i, ..., x_i, y)
        let rhs: f64 = xs.iter().map(|x| space.rep(x, y)).sum();
        tally.record("A3", d, rhs, tol.scaled(d, rhs), || {
            Witness::from_points(tuple)
        });
    });
    Ok(tally.into_report("axioms", samples.is_exhaustive()))
}

/// Checks `A(x, ..., x, y) = A(y, ..., y, x)` on pairs.
pub fn check_symmetry(space: &AMetricSpace, pairs: &SampleSet, tol: Tolerance) -> Result<CheckReport> {
    if pairs.width() != 2 {
        return Err(usage(format!(
            "check_symmetry needs pairs, got width {}",
            pairs.width()
        )));
    }
    ensure_members(space, pairs)?;
    let tally = sweep(pairs, |pair, tally| {
        let (x, y) = (&pair[0], &pair[1]);
        let forward = space.rep(x, y);
        let backward = space.rep(y, x);
        let gap = (forward - backward).abs();
        tally.record("lemma2", gap, 0.0, tol.scaled(forward, backward), || {
            Witness::from_points(pair)
        });
    });
    Ok(tally.into_report("lemma2_symmetry", pairs.is_exhaustive()))
}

/// Checks both triangle-type inequalities on triples `(x, y, z)`:
///
/// * `rep(x, z) <= (t - 1) rep(x, y) + rep(z, y)`
/// * `rep(x, z) <= (t - 1) rep(x, y) + rep(y, z)`
pub fn check_triangle_lemma(
    space: &AMetricSpace,
    triples: &SampleSet,
    tol: Tolerance,
) -> Result<CheckReport> {
    if triples.width() != 3 {
        return Err(usage(format!(
            "check_triangle_lemma needs triples, got width {}",
            triples.width()
        )));
    }
    ensure_members(space, triples)?;
    let scale = (space.t() - 1) as f64;
    let tally = sweep(triples, |triple, tally| {
        let (x, y, z) = (&triple[0], &triple[1], &triple[2]);
        let lhs = space.rep(x, z);
        let head = scale * space.rep(x, y);
        let first = head + space.rep(z, y);
        let second = head + space.rep(y, z);
        let witness = || Witness::from_points(triple);
        tally.record("lemma3a", lhs, first, tol.scaled(lhs, first), witness);
        tally.record("lemma3b", lhs, second, tol.scaled(lhs, second), witness);
    });
    Ok(tally.into_report("lemma3_triangle", triples.is_exhaustive()))
}

/// Sample sizes for [`check_space`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceCheckPlan {
    pub sampler: Sampler,
    pub n_tuples: usize,
    pub n_pairs: usize,
    pub n_triples: usize,
    pub bound: ExhaustiveBound,
    pub tol: Tolerance,
}

impl SpaceCheckPlan {
    pub fn new(seed: u64, n: usize) -> Self {
        SpaceCheckPlan {
            sampler: Sampler::new(seed),
            n_tuples: n,
            n_pairs: n,
            n_triples: n,
            bound: ExhaustiveBound::default(),
            tol: Tolerance::default(),
        }
    }
}

/// Axioms, symmetry and triangle lemma together, in that order.
pub fn check_space(space: &AMetricSpace, plan: &SpaceCheckPlan) -> Result<[CheckReport; 3]> {
    let t = space.t();
    let c = space.carrier();
    let s = &plan.sampler;
    let tuples = s.tuples_for(c, t, t + 1, plan.n_tuples, plan.bound)?;
    let pairs = s.tuples_for(c, t, 2, plan.n_pairs, plan.bound)?;
    let triples = s.tuples_for(c, t, 3, plan.n_triples, plan.bound)?;
    Ok([
        check_axioms(space, &tuples, plan.tol)?,
        check_symmetry(space, &pairs, plan.tol)?,
        check_triangle_lemma(space, &triples, plan.tol)?,
    ])
}
