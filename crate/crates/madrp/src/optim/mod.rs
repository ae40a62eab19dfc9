//! Dense convex optimization building blocks: simplex projection, a
//! primal-dual interior-point linear programming solver, and a barrier
//! Newton method for the logarithmic risk parity programs.

pub mod barrier;
pub mod linalg;
pub mod lp;
pub mod simplex;

pub use barrier::{solve_barrier, BarrierOptions, BarrierProblem, BarrierSolution, SmoothTerm};
pub use lp::{solve_lp, LinearProgram, SolveStatus, Status};
pub use simplex::project_simplex;
