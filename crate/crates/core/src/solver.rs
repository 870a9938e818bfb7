//! Picard iteration with certified error envelopes.
//!
//! For a map with contraction factor `delta` the steps `d_n = A(x_{n+1}..x_{n+1}, x_n)`
//! satisfy `d_n <= delta * d_{n-1} <= delta^n * d_0`. Chaining the triangle-type
//! lemma along the trace gives, for `n < m`,
//!
//! ```text
//! A(x_n..x_n, x_m) <= (t-1) * delta^n * d_0 / (1 - delta)
//! ```
//!
//! and the same quantity bounds the distance from `x_n` to the limit.

use serde::{Deserialize, Serialize};

use crate::check::{map_ordered, CheckReport, Tally, Tolerance, Witness};
use crate::error::{usage, Error, Result};
use crate::space::{AMetricSpace, Arity, Point};
use crate::spaces::SelfMap;

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Consecutive growing steps after which a run is declared divergent.
pub const DIVERGENCE_RUN: usize = 10;

/// Residual acceptance factor: `A(fp..fp, p) <= RESIDUAL_FACTOR * eps`.
pub const RESIDUAL_FACTOR: f64 = 10.0;

/// Iterates beyond this index are not used by the pairwise Cauchy check.
pub const CAUCHY_MAX_ITERATES: usize = 256;

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once a step is at most `eps`.
    pub eps: f64,
    pub max_iter: usize,
    /// Stop once the a-priori tail bound is at most this (needs a certified delta).
    #[serde(default)]
    pub bound_eps: Option<f64>,
}

impl StopRule {
    pub fn new(eps: f64, max_iter: usize) -> Result<Self> {
        let rule = StopRule {
            eps,
            max_iter,
            bound_eps: None,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn with_bound_eps(mut self, bound_eps: f64) -> Result<Self> {
        self.bound_eps = Some(bound_eps);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(usage(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_iter == 0 {
            return Err(usage("max_iter must be at least 1"));
        }
        if let Some(b) = self.bound_eps {
            if !(b > 0.0 && b.is_finite()) {
                return Err(usage(format!("bound_eps must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Diverged,
}

/// Full record of one Picard run.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardTrace {
    pub t: usize,
    /// `x_0, x_1, ..., x_N`.
    pub iterates: Vec<Point>,
    /// `d_n = A(x_{n+1}..x_{n+1}, x_n)` for `n = 0..N-1`.
    pub steps: Vec<f64>,
    /// Contraction factor used for the envelopes; `None` when unmonitored.
    pub delta: Option<f64>,
    /// `delta^n * d_0` per step; empty when unmonitored.
    pub bounds: Vec<f64>,
    pub status: Status,
    pub limit: Option<Point>,
}

/// One row of the per-iteration CSV export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub step: f64,
    pub bound: Option<f64>,
    /// `d_n / d_{n-1}`; absent for `n = 0` or a zero previous step.
    pub ratio: Option<f64>,
    pub tail_bound: Option<f64>,
}

impl PicardTrace {
    fn arity(&self) -> Arity {
        Arity::new(self.t).expect("trace arity is at least 2")
    }

    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn d0(&self) -> Option<f64> {
        self.steps.first().copied()
    }

    pub fn final_step(&self) -> Option<f64> {
        self.steps.last().copied()
    }

    /// `d_n / d_{n-1}` for every `n >= 1` with a nonzero predecessor.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.steps
            .iter()
            .enumerate()
            .map(|(n, &d)| match n.checked_sub(1).map(|k| self.steps[k]) {
                Some(prev) if prev > 0.0 => Some(d / prev),
                _ => None,
            })
            .collect()
    }

    /// A-priori error envelope `(t-1) delta^n d_0 / (1 - delta)` for `x_n`.
    pub fn tail_bound_at(&self, n: usize) -> Option<f64> {
        let (delta, d0) = (self.delta?, self.d0()?);
        tail_bound(delta, self.arity(), d0, n).ok()
    }

    /// A-posteriori radius around the last iterate: the tail bound restarted
    /// from the second-to-last iterate. Zero for a trace that never moved.
    pub fn posterior_radius(&self, eps: f64) -> f64 {
        match (self.delta, self.final_step()) {
            (_, None) => 0.0,
            (Some(delta), Some(last)) => {
                tail_bound(delta, self.arity(), last, 1).unwrap_or(RESIDUAL_FACTOR * eps)
            }
            (None, Some(_)) => RESIDUAL_FACTOR * eps,
        }
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        let ratios = self.ratios();
        self.steps
            .iter()
            .enumerate()
            .map(|(n, &step)| TraceRow {
                n,
                step,
                bound: self.bounds.get(n).copied(),
                ratio: ratios[n],
                tail_bound: self.tail_bound_at(n),
            })
            .collect()
    }
}

/// `(t-1) * delta^n * d0 / (1 - delta)`.
pub fn tail_bound(delta: f64, t: Arity, d0: f64, n: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(usage(format!("delta must lie in [0, 1), got {delta}")));
    }
    if !(d0 >= 0.0) {
        return Err(usage(format!("d0 must be nonnegative, got {d0}")));
    }
    let power = delta.powi(n.min(i32::MAX as usize) as i32);
    Ok((t.as_f64() - 1.0) * power * d0 / (1.0 - delta))
}

/// Iterates `x_{n+1} = f(x_n)` from `x0`.
///
/// `delta` in `[0, 1)` enables the envelopes and the `bound_eps` stop; a
/// negative `delta` disables them for maps without a certificate. A run is
/// declared divergent after [`DIVERGENCE_RUN`] consecutive steps that grow by
/// more than `1 / delta` (more than 1 when unmonitored), or on a non-finite
/// iterate. A finite iterate outside the carrier is an error.
pub fn picard_run(
    space: &AMetricSpace,
    f: &SelfMap,
    x0: &Point,
    delta: f64,
    rule: &StopRule,
) -> Result<PicardTrace> {
    rule.validate()?;
    if !space.carrier().contains(x0) {
        return Err(Error::OutsideCarrier {
            point: x0.coords().to_vec(),
        });
    }
    let delta = if delta < 0.0 {
        None
    } else if delta < 1.0 {
        Some(delta)
    } else {
        return Err(usage(format!("delta must be below 1, got {delta}")));
    };
    let t = space.arity();
    let growth = match delta {
        Some(d) if d > 0.0 => 1.0 / d,
        _ => 1.0,
    };

    let mut trace = PicardTrace {
        t: t.get(),
        iterates: vec![x0.clone()],
        steps: Vec::new(),
        delta,
        bounds: Vec::new(),
        status: Status::MaxIter,
        limit: None,
    };
    let mut growing = 0usize;

    for n in 0..rule.max_iter {
        let x = trace.iterates.last().expect("trace starts with x0");
        let fx = f.apply(x);
        if !fx.is_finite() {
            trace.status = Status::Diverged;
            return Ok(trace);
        }
        if !space.carrier().contains(&fx) {
            return Err(Error::Escaped {
                index: n + 1,
                point: fx.into_coords(),
            });
        }
        let d = space.rep(&fx, x);
        if n == 0 && d == 0.0 {
            trace.status = Status::Converged;
            trace.limit = Some(x0.clone());
            return Ok(trace);
        }
        if !d.is_finite() {
            trace.status = Status::Diverged;
            return Ok(trace);
        }

        if let Some(&prev) = trace.steps.last() {
            growing = if d > prev * growth { growing + 1 } else { 0 };
        }
        trace.steps.push(d);
        if let Some(dl) = delta {
            trace.bounds.push(dl.powi(n.min(i32::MAX as usize) as i32) * trace.steps[0]);
        }
        trace.iterates.push(fx);

        let tail_done = match (delta, rule.bound_eps) {
            (Some(dl), Some(be)) => tail_bound(dl, t, trace.steps[0], n + 1)? <= be,
            _ => false,
        };
        if d <= rule.eps || tail_done {
            trace.status = Status::Converged;
            trace.limit = trace.iterates.last().cloned();
            return Ok(trace);
        }
        if growing >= DIVERGENCE_RUN {
            trace.status = Status::Diverged;
            return Ok(trace);
        }
    }
    Ok(trace)
}

fn certified(trace: &PicardTrace) -> Result<f64> {
    trace
        .delta
        .ok_or_else(|| usage("envelope checks need a trace run with a certified delta"))
}

/// Checks `d_n <= delta * d_{n-1}` and `d_n <= delta^n * d_0` along a trace.
pub fn verify_decay(trace: &PicardTrace, tol: Tolerance) -> Result<CheckReport> {
    let delta = certified(trace)?;
    let mut tally = Tally::default();
    let mut max_ratio: f64 = 0.0;
    if let Some(d0) = trace.d0() {
        for n in 1..trace.steps.len() {
            let (d, prev) = (trace.steps[n], trace.steps[n - 1]);
            if prev > 0.0 {
                max_ratio = max_ratio.max(d / prev);
            }
            let one_step = delta * prev;
            let envelope = delta.powi(n.min(i32::MAX as usize) as i32) * d0;
            tally.record("ratio", d, one_step, tol.scaled(d, one_step), || {
                Witness::Indices(vec![n])
            });
            tally.record("envelope", d, envelope, tol.scaled(d, envelope), || {
                Witness::Indices(vec![n])
            });
        }
    }
    let mut report = tally.into_report("decay", true);
    report.metrics.insert("max_ratio".into(), max_ratio);
    Ok(report)
}

/// Checks the pairwise Cauchy envelope on a trace.
///
/// For every recorded `n < m` (up to [`CAUCHY_MAX_ITERATES`]) asserts
/// `A(x_n..x_n, x_m) <= (t-1) delta^n d_0 / (1 - delta)`, and for a converged
/// trace also `A(x_n..x_n, p) <=` the same bound for the limit `p`.
/// The alternative estimate `[(t-1) delta^{m+n} / (1 - delta) + delta^{m-1}] d_0`
/// is evaluated too, and only its satisfaction rate is reported (metric
/// `printed_bound_rate`); its geometric-sum factor is too small in general.
pub fn verify_cauchy(trace: &PicardTrace, space: &AMetricSpace, tol: Tolerance) -> Result<CheckReport> {
    let delta = certified(trace)?;
    let t = space.arity();
    let tm1 = t.as_f64() - 1.0;
    let mut tally = Tally::default();
    let (mut printed_ok, mut corrected_ok, mut total) = (0usize, 0usize, 0usize);

    if let Some(d0) = trace.d0() {
        let xs = &trace.iterates[..trace.iterates.len().min(CAUCHY_MAX_ITERATES + 1)];
        let pow = |k: usize| delta.powi(k.min(i32::MAX as usize) as i32);
        for n in 0..xs.len() {
            let corrected = tail_bound(delta, t, d0, n)?;
            for m in n + 1..xs.len() {
                let lhs = space.rep(&xs[n], &xs[m]);
                let slack = tol.scaled(lhs, corrected);
                tally.record("cauchy", lhs, corrected, slack, || Witness::Indices(vec![n, m]));
                let printed = (tm1 * pow(m + n) / (1.0 - delta) + pow(m - 1)) * d0;
                total += 1;
                corrected_ok += usize::from(lhs - corrected <= slack);
                printed_ok += usize::from(lhs - printed <= tol.scaled(lhs, printed));
            }
            if let Some(p) = &trace.limit {
                let lhs = space.rep(&xs[n], p);
                tally.record("tail", lhs, corrected, tol.scaled(lhs, corrected), || {
                    Witness::Indices(vec![n])
                });
            }
        }
    }
    let mut report = tally.into_report("cauchy", true);
    let rate = |ok: usize| if total == 0 { 1.0 } else { ok as f64 / total as f64 };
    report.metrics.insert("corrected_bound_rate".into(), rate(corrected_ok));
    report.metrics.insert("printed_bound_rate".into(), rate(printed_ok));
    report.metrics.insert("pairs".into(), total as f64);
    Ok(report)
}

/// Runs Picard from every start and checks that all runs converge to one
/// fixed point.
///
/// Two limits agree when `A(p_i..p_i, p_0) <= (t-1) r_i + r_0` (plus the
/// check tolerance), where `r` is each run's a-posteriori radius. The
/// consensus limit must satisfy `A(fp..fp, p) <= 10 eps`.
pub fn uniqueness_probe(
    space: &AMetricSpace,
    f: &SelfMap,
    starts: &[Point],
    delta: f64,
    rule: &StopRule,
    tol: Tolerance,
) -> Result<CheckReport> {
    if starts.len() < 2 {
        return Err(usage("uniqueness probe needs at least two starting points"));
    }
    let runs = map_ordered(starts, |x0| picard_run(space, f, x0, delta, rule));
    let tm1 = space.arity().as_f64() - 1.0;
    let mut tally = Tally::default();
    let mut limits: Vec<(usize, Point, f64)> = Vec::new();

    for (i, run) in runs.into_iter().enumerate() {
        let start = || Witness::from_points([&starts[i]]);
        match run {
            Ok(trace) if trace.status == Status::Converged => {
                let radius = trace.posterior_radius(rule.eps);
                let p = trace.limit.expect("converged traces have a limit");
                tally.record("converge", 0.0, 0.0, 0.0, start);
                limits.push((i, p, radius));
            }
            Ok(trace) => {
                let last = trace.final_step().unwrap_or(f64::INFINITY);
                tally.record("converge", last, rule.eps, 0.0, start);
            }
            Err(Error::Escaped { .. }) => {
                tally.record("converge", f64::INFINITY, rule.eps, 0.0, start);
            }
            Err(e) => return Err(e),
        }
    }

    let mut spread: f64 = 0.0;
    if let Some((_, p0, r0)) = limits.first().cloned() {
        for (i, p, r) in &limits[1..] {
            let lhs = space.rep(p, &p0);
            spread = spread.max(lhs);
            let rhs = tm1 * r + r0 + space.eq_tol();
            tally.record("agree", lhs, rhs, tol.scaled(lhs, rhs), || {
                Witness::from_points([&starts[*i], p, &p0])
            });
        }
        let residual = space.rep(&f.apply(&p0), &p0);
        let cap = RESIDUAL_FACTOR * rule.eps;
        tally.record("residual", residual, cap, tol.scaled(residual, cap), || {
            Witness::from_points([&p0])
        });
    }
    let mut report = tally.into_report("uniqueness", false);
    report.metrics.insert("limit_spread".into(), spread);
    report.metrics.insert("converged_runs".into(), limits.len() as f64);
    Ok(report)
}

/// Every fixed point of `f` on a finite carrier, by enumeration.
pub fn brute_force_fixed_points(space: &AMetricSpace, f: &SelfMap) -> Result<Vec<Point>> {
    let points = space
        .carrier()
        .points()
        .ok_or_else(|| usage("brute-force fixed points need a finite carrier"))?;
    Ok(points
        .into_iter()
        .filter(|x| space.points_equal(&f.apply(x), x))
        .collect())
}

/// Compares Picard against enumeration on a finite carrier.
///
/// Passes when enumeration finds exactly one fixed point and Picard from
/// every carrier point converges to it (within `eq_tol`). Metric
/// `fixed_points` records how many fixed points enumeration found.
pub fn oracle_agreement(
    space: &AMetricSpace,
    f: &SelfMap,
    delta: f64,
    rule: &StopRule,
) -> Result<CheckReport> {
    let fixed = brute_force_fixed_points(space, f)?;
    let starts = space.carrier().points().unwrap_or_default();
    let mut tally = Tally::default();
    let count = fixed.len() as f64;
    tally.record("unique", (count - 1.0).abs(), 0.0, 0.0, || {
        Witness::Points(fixed.iter().map(|p| p.coords().to_vec()).collect())
    });
    if let [p] = fixed.as_slice() {
        let runs = map_ordered(&starts, |x0| picard_run(space, f, x0, delta, rule));
        for (x0, run) in starts.iter().zip(runs) {
            let miss = match run {
                Ok(trace) => match trace.limit {
                    Some(limit) if trace.status == Status::Converged => limit.max_abs_diff(p),
                    _ => f64::INFINITY,
                },
                Err(Error::Escaped { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            tally.record("reach", miss, space.eq_tol(), 0.0, || {
                Witness::from_points([x0, p])
            });
        }
    }
    let mut report = tally.into_report("oracle", true);
    report.metrics.insert("fixed_points".into(), count);
    Ok(report)
}
