//! Sequential quadratic programming in original and logarithmic coordinates.
//!
//! [`sqp`] runs classical SQP on `min f(x) s.t. g(x) <= 1, h(x) = 1`.
//! [`lsqp`] runs the same iteration after the substitution `y = log x` with
//! every function logged, which turns monomials into affine functions and
//! posynomials into convex ones. Both consume the same black-box [`Problem`]
//! and differ only in the coordinates their sub-problems are built in.
//!
//! The [`benchmarks`] and [`harness`] modules reproduce a Monte Carlo
//! comparison of the two solvers on four engineering test problems.

pub mod benchmarks;
pub mod bfgs;
pub mod cli;
pub mod gp;
pub mod harness;
pub mod kkt;
pub mod lsqp;
pub mod problem;
pub mod qp;
pub mod report;
pub mod solver;
pub mod sqp;
pub mod standard_form;

pub use problem::{evaluate_point, Evaluation, FunctionId, KnownOptimum, Problem, ScalarFunction};
pub use solver::{Algorithm, SolveResult, SolverOptions, Termination};
