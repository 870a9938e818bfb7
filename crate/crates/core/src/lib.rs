//! A-metric spaces, Zamfirescu-type contraction certificates and certified
//! Picard iteration.
//!
//! An A-metric space generalizes a metric to a `t`-argument distance
//! `A(x_1, ..., x_t)`; `t = 2` is an ordinary metric. This crate provides
//!
//! * [`space`]: the space abstraction with checked evaluation;
//! * [`spaces`]: concrete spaces (pairwise absolute difference, lifted
//!   metric tables) and a catalog of self-maps;
//! * [`check`]: empirical verification of the axioms and the two-point lemmas;
//! * [`zamfirescu`]: classification of self-maps and the contraction factor;
//! * [`solver`]: Picard iteration, decay and Cauchy envelopes, uniqueness
//!   probes and a brute-force fixed-point oracle for finite spaces;
//! * [`sampling`]: seeded, reproducible sample sets.
//!
//! ```
//! use ametric_core::prelude::*;
//!
//! let space = make_absdiff_space(Arity::new(3).unwrap(), 1, None).unwrap();
//! let f = make_map(MapSpec::TwoSevenths, &space).unwrap();
//! let pairs = Sampler::new(7).tuples(space.carrier(), 2, 200).unwrap();
//! let cert = classify(&space, &f, &pairs).unwrap();
//! assert!(cert.valid);
//!
//! let rule = StopRule::new(1e-12, 1_000).unwrap();
//! let trace = picard_run(&space, &f, &Point::scalar(7.0), cert.delta.unwrap(), &rule).unwrap();
//! assert!(trace.limit.unwrap().coords()[0].abs() < 1e-11);
//! ```

pub mod check;
pub mod error;
pub mod sampling;
pub mod solver;
pub mod space;
pub mod spaces;
pub mod zamfirescu;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::check::{
        check_axioms, check_space, check_symmetry, check_triangle_lemma, CheckReport,
        SpaceCheckPlan, Tally, Tolerance, Violation, Witness,
    };
    pub use crate::error::Error;
    pub use crate::sampling::{ExhaustiveBound, SampleSet, Sampler};
    pub use crate::solver::{
        brute_force_fixed_points, oracle_agreement, picard_run, tail_bound, uniqueness_probe, verify_cauchy,
        verify_decay, PicardTrace, Status, StopRule,
    };
    pub use crate::space::{AMetricSpace, Arity, Carrier, Point};
    pub use crate::spaces::{
        make_absdiff_space, make_lifted_fn_space, make_lifted_space, make_lifted_space_unchecked,
        make_map, MapSpec, Piece, SelfMap,
    };
    pub use crate::zamfirescu::{
        branch_constants, check_az_conditions, classify, compute_delta, verify_lemma1,
        ZamfirescuCertificate,
    };
}
