//! Analysis toolkit for the JSQ(d) "supermarket" load-balancing model.
//!
//! The crate is organised around the scaled occupancy process of an
//! `n`-server system in which every arrival samples `d` servers without
//! replacement and joins the shortest sampled queue:
//!
//! - [`occupancy`]: occupancy vectors, trajectories and system parameters.
//! - [`skorokhod`]: the chained one-sided Skorokhod problem with upper barrier 1.
//! - [`ratefn`]: the Poisson cost `l(z) = z log z - z + 1`, control costs and
//!   the closed-form decay rate for large total job counts.
//! - [`fluid`]: split-step integration of controlled fluid equations.
//! - [`sim`]: exact continuous-time simulation of the occupancy chain with
//!   optional exponential tilting and likelihood-ratio weighting.
//! - [`io`]: CSV and JSON formats for paths.

pub mod error;
pub mod fluid;
pub mod io;
pub mod occupancy;
pub mod ratefn;
pub mod sim;
pub mod skorokhod;

pub use error::{Error, Result};
pub use fluid::{
    integrate_fluid, lln_trajectory, wellposedness_check, ConvergenceReport, FluidSolution,
    MasterControl,
};
pub use occupancy::{
    l1_norm, total_jobs, InitialOccupancy, Interpolation, OccupancyState, PiecewisePath,
    SystemParams,
};
pub use ratefn::{
    brute_force_rate, control_cost, ell, ell_bounds_check, optimal_rate, optimal_tilt,
    BruteForceRate, CostWeights, EllBoundsReport, OptimalTilt,
};
pub use sim::{
    beta_n, estimate_probability, estimate_with, remark_bound, replica_rng, simulate,
    simulate_with, BetaTable, DSchedule, Engine, Estimate, Jump, RareEvent, RareEventKind,
    RemarkBound, SimResult, TiltSpec,
};
pub use skorokhod::{
    complementarity_residual, lipschitz_gap, solve_skorokhod, ChainReflector, SkorokhodInput,
    SkorokhodSolution,
};

/// Version of this crate, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
