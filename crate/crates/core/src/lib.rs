//! Finite element solvers for a heat conduction problem whose right edge
//! carries a nonsmooth multivalued flux law, together with the associated
//! distributed optimal control machinery.

pub mod catalog;
pub mod control;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod sparse;
pub mod state;
pub mod superpotential;
pub mod sweep;

pub use error::{Error, Result};
pub use fem::{
    assemble, error_norms, estimate_coercivity, estimate_trace_norm, load_vector, norm,
    EigenOpts, ErrorNorms, FemSystem, Field, FieldRole, NormKind,
};
pub use mesh::{generate_unit_square, refine_uniform, BoundaryTag, Mesh2D, TaggingScheme};
pub use catalog::{ExprId, FieldSpec};
pub use control::{
    cost_alpha, cost_alpha_smoothed, cost_limit, gradient_alpha_smoothed, gradient_limit,
    recertify, solve_optimal_control_alpha, solve_optimal_control_alpha_with_starts,
    solve_optimal_control_limit, solve_optimal_control_limit_from,
    solve_optimal_control_robin_lumped, ControlProblem, OptimalPair, OptimizerConfig,
};
pub use state::{
    certification_threshold, hvi_residual_check, solve_hemivariational,
    solve_hemivariational_smoothed, solve_mixed_dirichlet, solve_mixed_dirichlet_trace,
    solve_robin, solve_robin_lumped, HviSolverConfig, StateSolution,
};
pub use sweep::{
    fit_loglog_exponent, nonincreasing, strictly_decreasing, sweep_control, sweep_state,
    ControlSweep, StateSweep, StateSweepRecord, SweepRecord,
};
pub use superpotential::{smallness_check, HypothesisReport, SamplingGrid, Superpotential};
