//! Classification of self-maps as A-Zamfirescu (AZ) mappings.
//!
//! A map `f` is AZ when there are constants `0 <= a < 1` and
//! `0 <= b, c < 1/t` such that every pair `(x, y)` satisfies at least one of
//!
//! * (AZ1) `A(fx..fx, fy) <= a * A(x..x, y)`
//! * (AZ2) `A(fx..fx, fy) <= b * [A(fx..fx, x) + A(fy..fy, y)]`
//! * (AZ3) `A(fx..fx, fy) <= c * [A(fx..fx, y) + A(fy..fy, x)]`
//!
//! The lower bound 0 is admitted for all three constants; at `t = 2` this is
//! slightly wider than the classical open ranges `b, c in (0, 1/2)`.
//!
//! Such a map also satisfies, with
//! `delta = max{a, b / (1 - b(t-1)), c / (1 - c(t-1))} < 1`,
//!
//! * (1) `A(fx..fx, fy) <= delta * A(x..x, y) + t * delta * A(fx..fx, x)`
//! * (2) `A(fx..fx, fy) <= delta * A(x..x, y) + t * delta * A(fy..fy, x)`
//!
//! which is what drives the geometric decay of Picard iteration.

use serde::{Deserialize, Serialize};

use crate::check::{ensure_members, map_ordered, sweep, CheckReport, Tolerance, Witness};
use crate::error::{usage, Result};
use crate::sampling::SampleSet;
use crate::space::{AMetricSpace, Arity, Point};
use crate::spaces::SelfMap;

/// Default relative inflation applied to constants before bounds are computed.
pub const DEFAULT_SAFETY_MARGIN: f64 = 1e-9;

/// Relative slack allowed when preferring an earlier branch.
const TIE_REL: f64 = 1e-9;

/// Witnesses kept in a certificate.
const MAX_WITNESSES: usize = 64;

/// One of the three AZ conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Az1,
    Az2,
    Az3,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Az1, Branch::Az2, Branch::Az3];

    fn idx(self) -> usize {
        self as usize
    }
}

/// `num / den` with `0/0 = 0` and `k/0 = +inf`.
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// The smallest constant each AZ condition needs for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchConstants {
    pub pair: (Point, Point),
    pub a_req: f64,
    pub b_req: f64,
    pub c_req: f64,
}

impl BranchConstants {
    fn get(&self, b: Branch) -> f64 {
        match b {
            Branch::Az1 => self.a_req,
            Branch::Az2 => self.b_req,
            Branch::Az3 => self.c_req,
        }
    }

    /// Each constant divided by its cap: `a`, `b * t`, `c * t`. A branch is
    /// feasible iff its normalized value is below 1.
    pub fn normalized(&self, t: Arity) -> [f64; 3] {
        let t = t.as_f64();
        [self.a_req, self.b_req * t, self.c_req * t]
    }
}

/// Both sides of every AZ condition for `(x, y)`.
struct AzTerms {
    image: f64,
    az1: f64,
    az2: f64,
    az3: f64,
}

fn az_terms(space: &AMetricSpace, f: &SelfMap, x: &Point, y: &Point) -> AzTerms {
    let (fx, fy) = (f.apply(x), f.apply(y));
    AzTerms {
        image: space.rep(&fx, &fy),
        az1: space.rep(x, y),
        az2: space.rep(&fx, x) + space.rep(&fy, y),
        az3: space.rep(&fx, y) + space.rep(&fy, x),
    }
}

/// Minimal per-branch constants for a single pair. No carrier checks.
pub fn branch_constants(space: &AMetricSpace, f: &SelfMap, x: &Point, y: &Point) -> BranchConstants {
    let terms = az_terms(space, f, x, y);
    BranchConstants {
        pair: (x.clone(), y.clone()),
        a_req: ratio(terms.image, terms.az1),
        b_req: ratio(terms.image, terms.az2),
        c_req: ratio(terms.image, terms.az3),
    }
}

/// `delta = max{a, b / (1 - b(t-1)), c / (1 - c(t-1))}`.
///
/// Requires `0 <= a < 1` and `0 <= b, c < 1/t`; the result is then in `[0, 1)`.
pub fn compute_delta(a: f64, b: f64, c: f64, t: Arity) -> Result<f64> {
    let tf = t.as_f64();
    let cap = 1.0 / tf;
    if !(0.0..1.0).contains(&a) {
        return Err(usage(format!("a must lie in [0, 1), got {a}")));
    }
    if !(0.0..cap).contains(&b) {
        return Err(usage(format!("b must lie in [0, 1/{t}), got {b}")));
    }
    if !(0.0..cap).contains(&c) {
        return Err(usage(format!("c must lie in [0, 1/{t}), got {c}")));
    }
    let kannan = |k: f64| k / (1.0 - k * (tf - 1.0));
    Ok(a.max(kannan(b)).max(kannan(c)))
}

/// A pair for which no AZ branch is feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub pair: [Vec<f64>; 2],
    /// `+inf` values serialize as `null`.
    pub a_req: f64,
    pub b_req: f64,
    pub c_req: f64,
}

/// Number of pairs assigned to each branch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub az1: usize,
    pub az2: usize,
    pub az3: usize,
}

/// Result of classifying a map on a pair set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZamfirescuCertificate {
    pub t: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `None` when the constants are out of range.
    pub delta: Option<f64>,
    pub valid: bool,
    /// True when the pair set covers every pair of a finite carrier.
    pub exhaustive: bool,
    pub n_pairs: usize,
    /// Smallest achievable maximum of the normalized constants.
    pub max_normalized: f64,
    pub branch_counts: BranchCounts,
    /// Pairs with no feasible branch.
    pub witnesses: Vec<PairWitness>,
    pub witness_count: usize,
    /// Chosen branch per pair, aligned with the classified pair set.
    #[serde(skip)]
    pub assignments: Vec<Branch>,
}

impl ZamfirescuCertificate {
    fn arity(&self) -> Arity {
        Arity::new(self.t).expect("certificate arity is at least 2")
    }

    /// `delta` after inflating `a, b, c` by `1 + margin`. Falls back to the
    /// raw value if inflation would push a constant out of range.
    pub fn delta_with_margin(&self, margin: f64) -> Option<f64> {
        let raw = self.delta?;
        let k = 1.0 + margin.max(0.0);
        Some(compute_delta(self.a * k, self.b * k, self.c * k, self.arity()).unwrap_or(raw))
    }
}

/// Classifies `f` on the given pairs.
///
/// Each pair needs one satisfied branch, and pairs are independent, so the
/// smallest achievable maximum of the normalized constants is
/// `S = max over pairs of min(a_req, t b_req, t c_req)`. Each pair is then
/// assigned to the first branch (AZ1, AZ2, AZ3) whose normalized constant is
/// within `S`, and `a`, `b`, `c` are the largest requirements among the pairs
/// assigned to each branch. This attains `S` and keeps `b` and `c` at zero
/// whenever AZ1 alone suffices.
pub fn classify(space: &AMetricSpace, f: &SelfMap, pairs: &SampleSet) -> Result<ZamfirescuCertificate> {
    if pairs.is_empty() {
        return Err(usage("classification needs at least one pair"));
    }
    if pairs.width() != 2 {
        return Err(usage(format!("classification needs pairs, got width {}", pairs.width())));
    }
    ensure_members(space, pairs)?;
    let t = space.arity();

    let constants = map_ordered(pairs.tuples(), |p| branch_constants(space, f, &p[0], &p[1]));
    let normalized: Vec<[f64; 3]> = constants.iter().map(|c| c.normalized(t)).collect();
    let min_of = |n: &[f64; 3]| n.iter().copied().fold(f64::INFINITY, f64::min);
    let best = normalized.iter().map(min_of).fold(0.0, f64::max);

    let threshold = if best < 1.0 {
        best + (best * TIE_REL).min((1.0 - best) / 2.0)
    } else {
        best * (1.0 + TIE_REL)
    };

    let mut maxima = [0.0f64; 3];
    let mut counts = BranchCounts::default();
    let mut assignments = Vec::with_capacity(constants.len());
    let mut witnesses = Vec::new();
    let mut witness_count = 0;
    for (bc, norm) in constants.iter().zip(&normalized) {
        let branch = Branch::ALL
            .into_iter()
            .find(|b| norm[b.idx()] <= threshold)
            .unwrap_or_else(|| {
                // Only reachable when every value is infinite or NaN.
                Branch::ALL
                    .into_iter()
                    .min_by(|x, y| norm[x.idx()].total_cmp(&norm[y.idx()]))
                    .unwrap_or(Branch::Az1)
            });
        maxima[branch.idx()] = maxima[branch.idx()].max(bc.get(branch));
        match branch {
            Branch::Az1 => counts.az1 += 1,
            Branch::Az2 => counts.az2 += 1,
            Branch::Az3 => counts.az3 += 1,
        }
        assignments.push(branch);

        if !(min_of(norm) < 1.0) {
            witness_count += 1;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(PairWitness {
                    pair: [bc.pair.0.coords().to_vec(), bc.pair.1.coords().to_vec()],
                    a_req: bc.a_req,
                    b_req: bc.b_req,
                    c_req: bc.c_req,
                });
            }
        }
    }

    let [a, b, c] = maxima;
    let delta = compute_delta(a, b, c, t).ok();
    Ok(ZamfirescuCertificate {
        t: t.get(),
        a,
        b,
        c,
        delta,
        valid: delta.is_some(),
        exhaustive: pairs.is_exhaustive(),
        n_pairs: pairs.len(),
        max_normalized: best,
        branch_counts: counts,
        witnesses,
        witness_count,
        assignments,
    })
}

/// Checks that every pair satisfies at least one AZ condition with the given
/// constants. Independent of how a classifier assigned branches.
pub fn check_az_conditions(
    space: &AMetricSpace,
    f: &SelfMap,
    (a, b, c): (f64, f64, f64),
    pairs: &SampleSet,
    tol: Tolerance,
) -> Result<CheckReport> {
    if pairs.width() != 2 {
        return Err(usage("AZ condition check needs pairs"));
    }
    ensure_members(space, pairs)?;
    let tally = sweep(pairs, |p, tally| {
        let terms = az_terms(space, f, &p[0], &p[1]);
        let rhs = (a * terms.az1).max(b * terms.az2).max(c * terms.az3);
        tally.record("az", terms.image, rhs, tol.scaled(terms.image, rhs), || {
            Witness::from_points(p)
        });
    });
    Ok(tally.into_report("az_conditions", pairs.is_exhaustive()))
}

/// Checks inequalities (1) and (2) for the given `delta` on every pair.
pub fn verify_lemma1(
    space: &AMetricSpace,
    f: &SelfMap,
    delta: f64,
    pairs: &SampleSet,
    tol: Tolerance,
) -> Result<CheckReport> {
    if pairs.width() != 2 {
        return Err(usage("one-step inequality check needs pairs"));
    }
    ensure_members(space, pairs)?;
    let tf = space.arity().as_f64();
    let tally = sweep(pairs, |p, tally| {
        let (x, y) = (&p[0], &p[1]);
        let (fx, fy) = (f.apply(x), f.apply(y));
        let lhs = space.rep(&fx, &fy);
        let base = delta * space.rep(x, y);
        let eq1 = base + tf * delta * space.rep(&fx, x);
        let eq2 = base + tf * delta * space.rep(&fy, x);
        let witness = || Witness::from_points(p);
        tally.record("eq1", lhs, eq1, tol.scaled(lhs, eq1), witness);
        tally.record("eq2", lhs, eq2, tol.scaled(lhs, eq2), witness);
    });
    Ok(tally.into_report("lemma1", pairs.is_exhaustive()))
}
