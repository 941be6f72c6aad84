//! Block-structured semidefinite programs and a dense primal-dual
//! interior-point solver.
//!
//! Problems are stored in equality form over a scalarized variable made of
//! PSD, nonnegative and free blocks (see [`SdpProblem`]). [`solve`] runs a
//! homogeneous self-dual path-following method with Mehrotra
//! predictor-corrector steps and HKM scaling; [`check_solution`] recomputes
//! residuals independently of the solver.

mod check;
mod error;
mod problem;
mod sdpa;
mod solution;
mod solver;

pub use check::{check_solution, ResidualReport};
pub use error::SdpError;
pub use problem::{tri_entry, tri_index, Block, Constraint, SdpProblem};
pub use sdpa::{read_sdpa, write_sdpa};
pub use solution::{BlockValue, Residuals, SdpSolution, SdpStatus};
pub use solver::{solve, SolverOptions};
