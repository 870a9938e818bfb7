//! Concrete spaces and self-maps used as fixtures and by the CLI.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::check::{check_space, SpaceCheckPlan, Witness};
use crate::error::{usage, Error, Result};
use crate::sampling::Sampler;
use crate::space::{AMetricSpace, Arity, Carrier, Kernel, Point};

/// Seed for construction-time gates. Fixed so that construction is
/// deterministic and independent of any experiment seed.
pub const GATE_SEED: u64 = 0x5eed_a11e_d0c5_0001;

/// Random samples used by construction gates on continuous carriers.
pub const GATE_SAMPLES: usize = 512;

/// `A(x_1..x_t) = sum_{i<j} ||x_i - x_j||_1` on a box in `R^d`.
///
/// `bounds = None` gives the whole of `R^d`. For `d = 1` this is the plain
/// sum of pairwise absolute differences.
pub fn make_absdiff_space(
    t: Arity,
    d: usize,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<AMetricSpace> {
    if d == 0 {
        return Err(usage("dimension must be at least 1"));
    }
    let carrier = match bounds {
        Some((lo, hi)) => {
            if lo.len() != d || hi.len() != d {
                return Err(usage(format!("box bounds must have dimension {d}")));
            }
            Carrier::new_box(lo, hi)?
        }
        None => Carrier::real(d)?,
    };
    Ok(AMetricSpace::from_kernel(
        t,
        carrier,
        Kernel::PairwiseAbsdiff,
        format!("absdiff(t={t}, d={d})"),
    ))
}

fn validate_table(table: &[Vec<f64>]) -> Result<()> {
    let n = table.len();
    if n == 0 {
        return Err(usage("base table is empty"));
    }
    if let Some((i, row)) = table.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(usage(format!(
            "base table must be square: row {i} has {} entries, expected {n}",
            row.len()
        )));
    }
    Ok(())
}

fn gate_failure(message: String, witness: Vec<Vec<f64>>) -> Error {
    Error::Construction { message, witness }
}

/// Checks the classical metric properties of a finite base table.
fn check_base_table(table: &[Vec<f64>]) -> Result<()> {
    let n = table.len();
    for i in 0..n {
        for j in 0..n {
            let v = table[i][j];
            let w = vec![vec![i as f64], vec![j as f64]];
            if !v.is_finite() || v < 0.0 {
                return Err(gate_failure(
                    format!("base table entry ({i}, {j}) = {v} is not a nonnegative number"),
                    w,
                ));
            }
            if i == j && v != 0.0 {
                return Err(gate_failure(format!("base table diagonal ({i}, {i}) = {v} is not zero"), w));
            }
            if v != table[j][i] {
                return Err(gate_failure(
                    format!("base table is not symmetric at ({i}, {j}): {v} vs {}", table[j][i]),
                    w,
                ));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (lhs, rhs) = (table[i][k], table[i][j] + table[j][k]);
                if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                    return Err(gate_failure(
                        format!("base table violates the triangle inequality: d({i},{k}) = {lhs} > {rhs}"),
                        vec![vec![i as f64], vec![j as f64], vec![k as f64]],
                    ));
                }
            }
        }
    }
    Ok(())
}

fn axiom_gate(space: AMetricSpace, plan: &SpaceCheckPlan) -> Result<AMetricSpace> {
    for report in check_space(&space, plan)? {
        if let Some(v) = report.violations.first() {
            let witness = match &v.witness {
                Witness::Points(p) => p.clone(),
                Witness::Indices(ix) => ix.iter().map(|&i| vec![i as f64]).collect(),
            };
            return Err(gate_failure(
                format!(
                    "{} check failed ({}): lhs {} exceeds rhs {} by {}",
                    report.name, v.rule, v.lhs, v.rhs, v.gap
                ),
                witness,
            ));
        }
    }
    Ok(space)
}

/// `A(x_1..x_t) = sum_{i<j} table[x_i][x_j]` over `{0..n-1}`, with no checks
/// on the table beyond its shape. Intended for negative controls and for
/// running the axiom checker on a candidate table.
pub fn make_lifted_space_unchecked(t: Arity, table: Vec<Vec<f64>>) -> Result<AMetricSpace> {
    validate_table(&table)?;
    let n = table.len();
    Ok(AMetricSpace::from_kernel(
        t,
        Carrier::finite(n)?,
        Kernel::LiftedTable(Arc::new(table)),
        format!("lifted(t={t}, n={n})"),
    ))
}

/// Lifts a classical metric table to a `t`-ary space.
///
/// The table must be a symmetric, zero-diagonal, nonnegative matrix obeying
/// the triangle inequality, and the lifted space must then pass the axiom
/// checker (exhaustively for small carriers). Any failure is returned as a
/// construction error carrying the offending points.
pub fn make_lifted_space(t: Arity, table: Vec<Vec<f64>>) -> Result<AMetricSpace> {
    validate_table(&table)?;
    check_base_table(&table)?;
    let space = make_lifted_space_unchecked(t, table)?;
    axiom_gate(space, &SpaceCheckPlan::new(GATE_SEED, GATE_SAMPLES))
}

/// Lifts a callable base metric on a continuous carrier. Gated on samples.
pub fn make_lifted_fn_space<F>(t: Arity, carrier: Carrier, base: F) -> Result<AMetricSpace>
where
    F: Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
{
    let label = format!("lifted_fn(t={t})");
    let space = AMetricSpace::from_kernel(t, carrier, Kernel::LiftedFn(Arc::new(base)), label);
    axiom_gate(space, &SpaceCheckPlan::new(GATE_SEED, GATE_SAMPLES))
}

/// One affine piece `slope * x + intercept` of a piecewise map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub slope: f64,
    pub intercept: f64,
}

fn default_shift() -> f64 {
    1.0
}

/// Declarative description of a self-map.
///
/// Scalar kinds act on each coordinate independently. On a finite carrier
/// they act on the point index, and the image must again be a valid index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MapSpec {
    /// `x -> lambda * x`
    LinearScale { lambda: f64 },
    /// `x -> 2x / 7`
    TwoSevenths,
    /// `x -> alpha * x + beta`
    Affine { alpha: f64, beta: f64 },
    /// `x -> value`
    Constant { value: f64 },
    Identity,
    /// `x -> x + by`
    Shift {
        #[serde(default = "default_shift")]
        by: f64,
    },
    /// `pieces[k]` applies on `[breakpoints[k-1], breakpoints[k])`, with the
    /// first and last pieces extending to infinity.
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
    },
    /// Explicit image of every point of a finite carrier.
    Table { image: Vec<usize> },
}

impl MapSpec {
    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(usage(format!("map parameter {name} must be finite, got {v}")))
            }
        };
        match self {
            MapSpec::LinearScale { lambda } => finite("lambda", *lambda),
            MapSpec::Affine { alpha, beta } => {
                finite("alpha", *alpha)?;
                finite("beta", *beta)
            }
            MapSpec::Constant { value } => finite("value", *value),
            MapSpec::Shift { by } => finite("by", *by),
            MapSpec::Piecewise { breakpoints, pieces } => {
                if pieces.len() != breakpoints.len() + 1 {
                    return Err(usage(format!(
                        "piecewise map needs {} pieces for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        pieces.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(usage("piecewise breakpoints must be strictly increasing"));
                }
                for b in breakpoints {
                    finite("breakpoint", *b)?;
                }
                for p in pieces {
                    finite("slope", p.slope)?;
                    finite("intercept", p.intercept)?;
                }
                Ok(())
            }
            MapSpec::TwoSevenths | MapSpec::Identity | MapSpec::Table { .. } => Ok(()),
        }
    }

    fn apply_scalar(&self, x: f64) -> f64 {
        match self {
            MapSpec::LinearScale { lambda } => lambda * x,
            MapSpec::TwoSevenths => 2.0 * x / 7.0,
            MapSpec::Affine { alpha, beta } => alpha * x + beta,
            MapSpec::Constant { value } => *value,
            MapSpec::Identity => x,
            MapSpec::Shift { by } => x + by,
            MapSpec::Piecewise { breakpoints, pieces } => {
                let k = breakpoints.partition_point(|b| *b <= x);
                let p = pieces[k];
                p.slope * x + p.intercept
            }
            MapSpec::Table { image } => {
                let i = x as usize;
                if x >= 0.0 && x.fract() == 0.0 && i < image.len() {
                    image[i] as f64
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Short human-readable name.
    pub fn name(&self) -> &'static str {
        match self {
            MapSpec::LinearScale { .. } => "linear_scale",
            MapSpec::TwoSevenths => "two_sevenths",
            MapSpec::Affine { .. } => "affine",
            MapSpec::Constant { .. } => "constant",
            MapSpec::Identity => "identity",
            MapSpec::Shift { .. } => "shift",
            MapSpec::Piecewise { .. } => "piecewise",
            MapSpec::Table { .. } => "table",
        }
    }
}

/// A self-map of a carrier. Pure and immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfMap {
    spec: MapSpec,
}

impl SelfMap {
    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn apply(&self, x: &Point) -> Point {
        Point::new(x.coords().iter().map(|&v| self.spec.apply_scalar(v)).collect())
    }
}

/// Points at which a map's range is checked on a box carrier.
fn probe_points(carrier: &Carrier, spec: &MapSpec) -> Vec<Point> {
    let Carrier::Box { lo, hi } = carrier else {
        return carrier.points().unwrap_or_default();
    };
    let d = lo.len();
    let mut probes = Sampler::new(GATE_SEED).points(carrier, GATE_SAMPLES);
    if d <= 10 {
        for mask in 0..(1usize << d) {
            let corner: Vec<f64> = (0..d)
                .map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] })
                .collect();
            if corner.iter().all(|v| v.is_finite()) {
                probes.push(Point::new(corner));
            }
        }
    }
    if let MapSpec::Piecewise { breakpoints, .. } = spec {
        for &b in breakpoints {
            for k in 0..d {
                if lo[k] <= b && b <= hi[k] {
                    let mut c: Vec<f64> = lo
                        .iter()
                        .zip(hi)
                        .map(|(l, h)| if l.is_finite() { *l } else if h.is_finite() { *h } else { 0.0 })
                        .collect();
                    c[k] = b;
                    probes.push(Point::new(c));
                }
            }
        }
    }
    probes
}

/// Builds a self-map and verifies that it sends the carrier into itself.
///
/// Finite carriers are checked point by point. Boxes are checked at their
/// finite corners, at piecewise breakpoints and on seeded random points.
pub fn make_map(spec: MapSpec, space: &AMetricSpace) -> Result<SelfMap> {
    spec.validate()?;
    let carrier = space.carrier();
    if let MapSpec::Table { image } = &spec {
        let n = carrier
            .len()
            .ok_or_else(|| usage("table maps need a finite carrier"))?;
        if image.len() != n {
            return Err(usage(format!(
                "table map has {} entries for a carrier of {n} points",
                image.len()
            )));
        }
    }
    let map = SelfMap { spec };
    for x in probe_points(carrier, &map.spec) {
        let fx = map.apply(&x);
        if !carrier.contains(&fx) {
            return Err(gate_failure(
                format!(
                    "{} map sends {:?} to {:?}, outside the carrier",
                    map.spec.name(),
                    x.coords(),
                    fx.coords()
                ),
                vec![x.into_coords(), fx.into_coords()],
            ));
        }
    }
    Ok(map)
}

/// A named (space, map) fixture.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub space: AMetricSpace,
    pub map: SelfMap,
}

fn entry(name: String, space: AMetricSpace, spec: MapSpec) -> CatalogEntry {
    let map = make_map(spec, &space).expect("catalog maps preserve their carriers");
    CatalogEntry { name, space, map }
}

/// Contractive maps that are expected to classify as Zamfirescu maps.
pub fn certified_catalog() -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    for t in [2usize, 3, 5] {
        let a = Arity::new(t).unwrap();
        let line = make_absdiff_space(a, 1, None).unwrap();
        let unit = make_absdiff_space(a, 1, Some((vec![0.0], vec![1.0]))).unwrap();
        let boxed = make_absdiff_space(a, 1, Some((vec![-10.0], vec![10.0]))).unwrap();
        let plane = make_absdiff_space(a, 2, Some((vec![-1.0, -1.0], vec![1.0, 1.0]))).unwrap();
        out.push(entry(format!("two_sevenths/t{t}"), line.clone(), MapSpec::TwoSevenths));
        out.push(entry(
            format!("linear_scale_0.5/t{t}"),
            boxed.clone(),
            MapSpec::LinearScale { lambda: 0.5 },
        ));
        out.push(entry(
            format!("affine_0.6x+1/t{t}"),
            line,
            MapSpec::Affine { alpha: 0.6, beta: 1.0 },
        ));
        out.push(entry(format!("constant_0.3/t{t}"), unit, MapSpec::Constant { value: 0.3 }));
        out.push(entry(
            format!("piecewise/t{t}"),
            boxed,
            MapSpec::Piecewise {
                breakpoints: vec![0.0],
                pieces: vec![
                    Piece { slope: 0.5, intercept: 1.0 },
                    Piece { slope: 0.25, intercept: 1.0 },
                ],
            },
        ));
        out.push(entry(
            format!("linear_scale_0.4_2d/t{t}"),
            plane,
            MapSpec::LinearScale { lambda: 0.4 },
        ));
    }
    out
}

/// Maps that must not classify: the identity and a unit shift on the line.
pub fn rejected_catalog() -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    for t in [2usize, 3, 5] {
        let line = make_absdiff_space(Arity::new(t).unwrap(), 1, None).unwrap();
        out.push(entry(format!("identity/t{t}"), line.clone(), MapSpec::Identity));
        out.push(entry(format!("shift/t{t}"), line, MapSpec::Shift { by: 1.0 }));
    }
    out
}
