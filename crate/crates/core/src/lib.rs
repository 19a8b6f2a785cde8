//! Simulation and numerics toolkit for minimum-weight traversal of random
//! complete bipartite graphs.
//!
//! The crate has three layers:
//!
//! * **Simulation** — [`graph`] defines two-coloured complete bipartite
//!   instances with deterministic edge weights, [`prim`] runs the
//!   minimum-weight traversal and records its trace, [`percolation`]
//!   couples the trace to threshold subgraphs, and [`exploration`]
//!   re-derives the traversal through greedy frontier searches with full
//!   bookkeeping.
//! * **Numerics** — [`limits`] solves the fixed-point systems describing
//!   the large-graph behaviour of the traversal's colour ratio and runs
//!   the matching two-type branching process.
//! * **Harness** — [`harness`] wires both into reproducible Monte Carlo
//!   experiments and exact verification sweeps.
//!
//! All randomness is derived from explicit seeds through the counter-based
//! generator in [`rng`]; reruns and worker counts never change results.

pub mod exploration;
pub mod graph;
pub mod harness;
pub mod limits;
pub mod percolation;
pub mod prim;
pub mod rng;
pub mod unionfind;

/// Crate-wide error type.
///
/// `InvalidInput` flags unusable arguments or configuration; `Violation`
/// flags a checked property that failed to hold (a detected inconsistency
/// or an exceeded tolerance).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("violation: {0}")]
    Violation(String),
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn violation(msg: impl Into<String>) -> Self {
        Error::Violation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub use exploration::{
    check_counting_identities, explore_in_order, is_geo, two_neighbourhood_exploration, Adjacency,
    ExplorationTrace, IdentityReport,
};
pub use graph::{Colour, EdgeId, GraphSpec, VertexId, WeightOracle};
pub use harness::{
    run_conditional_binomial_check, run_dual_check, run_experiment, run_verify_sweep,
    ExperimentConfig, ExperimentOutput, KappaRule, Regime, SizeSpec, SummaryRow, SummaryStats,
    VerifyOptions, VerifyReport,
};
pub use limits::{
    ell_inverse, ell_rho, extinction_probabilities, linear_limit_curve, simulate_two_type_bp,
    sublinear_limit, CurveTable, ExtinctionPair, LimitPoint, ThetaParams,
};
pub use percolation::{giant_stats, intervals_from_prim, ComponentIntervals, GiantStats};
pub use prim::{colour_ratio, ratio_trajectory, run_prim, PrimTrace, StartPolicy};
