//! Structure-preserving ADMM for box-constrained optimal control of a
//! space-time fractional diffusion equation on `(0,1)^2 x (0,1]`.
//!
//! The constraint operator is a 3-level Toeplitz matrix applied through FFTs,
//! the ADMM subproblem is solved by PCG with a 3-level circulant
//! preconditioner, and [`oracle`] carries dense reference versions of every
//! kernel for small grids.

pub mod admm;
pub mod circulant;
pub mod error;
pub mod fft;
pub mod oracle;
pub mod problem;
pub mod structured;

pub use admm::{solve, AdmmConfig, AdmmProblem, AdmmState, IterationRecord, Residuals, SolveResult, SolveStatus};
pub use circulant::{
    assemble_precond, clustering_report, precond_solve, symbol_eval, tchan, wiener_check, CirculantPreconditioner,
    ClusteringReport, WienerCheck,
};
pub use error::{Error, Result};
pub use problem::{
    desired_state, desired_state_fn, frac_coeffs, l2_misfit, objective_weights, scaling, Bounds, Grid,
    ObjectiveWeights, ProblemSpec, ScalingConstants,
};
pub use structured::{build_caputo, build_riesz, toeplitz_matvec, ConstraintOperator, ToeplitzSpec1D};
