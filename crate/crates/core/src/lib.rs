//! Operator-splitting toolkit for structured inclusion and multiblock
//! optimization problems.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: vectors, structured linear maps, positive definite solves.
//! * [`operators`]: set-valued operators represented by their resolvents,
//!   with comonotonicity metadata.
//! * [`functions`]: proximable functions and the regularized linear-composite
//!   subproblems the splitting algorithms repeatedly solve.
//! * [`splitting`]: the adaptive Douglas-Rachford iteration for two and for
//!   m operators, its convergence certificates, and the primal-dual
//!   correspondence between runs.
//! * [`admm`]: multiblock ADMM-type algorithms derived from the splitting
//!   iteration, with stopping residuals and KKT extraction.

pub mod admm;
pub mod error;
pub mod functions;
pub mod linalg;
pub mod operators;
pub mod splitting;

pub use error::{Error, Result};
pub use linalg::{
    cached_spd_solver, difference_matrix, op_norm, LinearMap, Matrix, NormEstimate, SpdSolver,
    Vector,
};
