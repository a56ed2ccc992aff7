//! Centralized numeric tolerances.
//!
//! Every tolerance used by the library lives here so the contracts are
//! auditable in one place. Values are part of the public behavior: marginal
//! checks, support thresholds and descent slacks are asserted against these
//! exact constants in the test suite.

/// Probability vectors must sum to 1 within this bound.
pub const MASS_TOL: f64 = 1e-12;

/// Couplings must reproduce their prescribed marginals within this bound.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Entries below this threshold are treated as outside the support of a
/// coupling (sup-norm distortions, geodesic supports).
pub const SUPPORT_EPS: f64 = 1e-15;

/// Slack allowed when asserting monotone descent of block-coordinate sweeps.
pub const DESCENT_SLACK: f64 = 1e-10;

/// Primal-dual gap allowed for the exact transportation solver.
pub const LP_GAP_TOL: f64 = 1e-9;

/// Relative reduced-cost threshold for simplex pivoting.
pub const PIVOT_REL_TOL: f64 = 1e-13;

/// Equality tolerance used when deduplicating enumerated polytope vertices.
pub const VERTEX_DEDUP_TOL: f64 = 1e-12;

/// Default relative-improvement stopping tolerance for iterative solvers.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default iteration cap for iterative solvers.
pub const DEFAULT_MAX_ITER: usize = 200;

/// Default number of restarts for nonconvex searches.
pub const DEFAULT_RESTARTS: usize = 10;

/// Default entropic regularization strength.
pub const DEFAULT_EPSILON: f64 = 1e-2;

/// Iteration count used when projecting random matrices onto the coupling
/// polytope during restart initialization.
pub const PROJECTION_ITERS: usize = 100;

/// Node-count cutoff between dense eigendecomposition and iterative
/// (Lanczos) eigensolves for heat-kernel computations.
pub const DENSE_EIG_LIMIT: usize = 2000;

/// Number of extremal eigenpairs retained by the truncated eigensolve.
pub const DEFAULT_EIG_BUDGET: usize = 300;
