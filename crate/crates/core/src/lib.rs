//! Homogeneous quadratic minimization with at most three quadratic constraints.
//!
//! Solves
//!
//! ```text
//!     minimize    xᴴ T x
//!     subject to  xᴴ Pᵢ x + 1 ≤ 0,   i = 1..m,  m ≤ 3
//! ```
//!
//! over complex `x`, with `T ≻ 0` and indefinite Hermitian `Pᵢ`. After
//! whitening (`z = Fᴴx`, `T = FFᴴ`) the optimum is `p* = −1/c*` where
//! `c* = min over unit u of maxᵢ uᴴCᵢu`. The two-constraint problem is
//! classified from the two minimum eigenpairs and, in the interesting case,
//! reduced to maximizing `λmin(C₁ + t(C₁ − C₂))` over a real `t`; the
//! three-constraint problem evaluates seven candidate points (one, two or all
//! three constraints binding) and keeps the best.
//!
//! ```
//! use hqcqp::{solve, HermitianMatrix, HqcqpProblem, SearchConfig};
//!
//! let t = HermitianMatrix::identity(2);
//! let p1 = HermitianMatrix::from_diag(&[-2.0, -1.0]);
//! let p2 = HermitianMatrix::from_diag(&[-1.0, -2.0]);
//! let problem = HqcqpProblem::new(t, vec![p1, p2]).unwrap();
//! let sol = solve(&problem, &SearchConfig::default()).unwrap();
//! assert!((sol.p_star - 2.0 / 3.0).abs() < 1e-4);
//! ```
//!
//! The [`oracle`] module provides an eigen-free Monte-Carlo estimate of `c*`
//! used to validate the solvers, and [`bench`] reproduces relative-error
//! convergence curves against it.

pub mod bench;
pub mod generator;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod search;
pub mod solver2;
pub mod solver3;

mod subspace;

pub use linalg::{
    inverse_sqrt_factor, min_eigenpair, quadratic_form, validate_hermitian, EigenPair, HermitianMatrix,
    LinalgError, LowerTriangular, C64,
};
pub use problem::{
    check_feasible, recover, reduce, solve, solve_reduced, CaseTag, Diagnostics, Fragment, HqcqpProblem,
    ProblemError, ReducedProblem, Solution, SolveError, BINDING_TOL, FEASIBILITY_TOL,
};
pub use search::{SearchConfig, SearchError, TracePoint};
