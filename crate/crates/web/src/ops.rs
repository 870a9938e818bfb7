//! Request/response handling behind the wasm exports.

use ametric_core::prelude::*;
use ametric_core::zamfirescu::DEFAULT_SAFETY_MARGIN;
use serde::{Deserialize, Serialize};

fn default_seed() -> u64 {
    1
}

fn default_pairs() -> usize {
    500
}

fn default_eps() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    200
}

/// A one-dimensional space: the line, or `[lo, hi]` when both are given.
#[derive(Debug, Clone, Deserialize)]
pub struct ClassifyRequest {
    pub t: usize,
    pub map: MapSpec,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct IterateRequest {
    #[serde(flatten)]
    pub space: ClassifyRequest,
    pub x0: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub valid: bool,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: Option<f64>,
    pub n_pairs: usize,
    pub branch_counts: [usize; 3],
    /// First pair that satisfies no branch, as `[x, y]`.
    pub witness: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iteration {
    pub classification: Classification,
    pub status: Status,
    pub iterates: Vec<f64>,
    pub steps: Vec<f64>,
    /// `delta^n d_0`, empty when the map is not certified.
    pub bounds: Vec<f64>,
    /// A-priori distance from each iterate to the limit.
    pub tail_bounds: Vec<f64>,
    pub limit: Option<f64>,
}

fn space_of(req: &ClassifyRequest) -> Result<AMetricSpace, String> {
    let t = Arity::new(req.t).map_err(|e| e.to_string())?;
    let bounds = match (req.lo, req.hi) {
        (Some(lo), Some(hi)) => Some((vec![lo], vec![hi])),
        (None, None) => None,
        _ => return Err("give both lo and hi, or neither".into()),
    };
    make_absdiff_space(t, 1, bounds).map_err(|e| e.to_string())
}

fn certify(req: &ClassifyRequest) -> Result<(AMetricSpace, SelfMap, ZamfirescuCertificate), String> {
    if req.n_pairs == 0 || req.n_pairs > 100_000 {
        return Err("n_pairs must be between 1 and 100000".into());
    }
    let space = space_of(req)?;
    let f = make_map(req.map.clone(), &space).map_err(|e| e.to_string())?;
    let pairs = Sampler::new(req.seed)
        .with_near_equal(false)
        .tuples(space.carrier(), 2, req.n_pairs)
        .map_err(|e| e.to_string())?;
    let cert = classify(&space, &f, &pairs).map_err(|e| e.to_string())?;
    Ok((space, f, cert))
}

fn summarize(cert: &ZamfirescuCertificate) -> Classification {
    let counts = &cert.branch_counts;
    Classification {
        valid: cert.valid,
        a: cert.a,
        b: cert.b,
        c: cert.c,
        delta: cert.delta,
        n_pairs: cert.n_pairs,
        branch_counts: [counts.az1, counts.az2, counts.az3],
        witness: cert.witnesses.first().map(|w| [w.pair[0][0], w.pair[1][0]]),
    }
}

pub fn run_classify(req: &ClassifyRequest) -> Result<Classification, String> {
    certify(req).map(|(_, _, cert)| summarize(&cert))
}

/// Runs Picard from `x0`. Uncertified maps are still iterated (up to
/// `max_iter`) so the page can show what goes wrong, but without bounds.
pub fn run_iterate(req: &IterateRequest) -> Result<Iteration, String> {
    if req.max_iter > 10_000 {
        return Err("max_iter is capped at 10000 in the demo".into());
    }
    let (space, f, cert) = certify(&req.space)?;
    let delta = cert.delta_with_margin(DEFAULT_SAFETY_MARGIN).unwrap_or(-1.0);
    let rule = StopRule::new(req.eps, req.max_iter).map_err(|e| e.to_string())?;
    let trace = picard_run(&space, &f, &Point::scalar(req.x0), delta, &rule).map_err(|e| e.to_string())?;
    let tail_bounds = if trace.delta.is_some() {
        (0..trace.iterates.len()).filter_map(|n| trace.tail_bound_at(n)).collect()
    } else {
        Vec::new()
    };
    Ok(Iteration {
        classification: summarize(&cert),
        status: trace.status,
        iterates: trace.iterates.iter().map(|p| p.coords()[0]).collect(),
        steps: trace.steps.clone(),
        bounds: trace.bounds.clone(),
        tail_bounds,
        limit: trace.limit.as_ref().map(|p| p.coords()[0]),
    })
}

pub fn contraction_factor(a: f64, b: f64, c: f64, t: usize) -> Result<f64, String> {
    let t = Arity::new(t).map_err(|e| e.to_string())?;
    compute_delta(a, b, c, t).map_err(|e| e.to_string())
}

fn parse<T: for<'de> Deserialize<'de>>(request: &str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn render<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn classify_json(request: &str) -> Result<String, String> {
    render(&run_classify(&parse(request)?)?)
}

pub fn iterate_json(request: &str) -> Result<String, String> {
    render(&run_iterate(&parse(request)?)?)
}
