//! Experiment front end for the `opsplit` solvers: synthetic signal
//! generation, denoising problem assembly, certified step-size
//! selection, run orchestration with CSV reports, and a plain-text
//! format for affine inclusion instances.
//!
//! The binary in this package exposes the same functionality as
//! subcommands; everything here is a library so reports and runs can be
//! driven from tests as well.

pub mod config;
pub mod experiment;
pub mod instance;
pub mod problem;
pub mod signal;
pub mod stepsize;

use opsplit::Error as SolverError;

/// Front-end error: solver failures ride along unchanged, configuration
/// and I/O problems get their own classes so exit codes can be assigned.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit code for the error: 2 certification failure, 3
/// divergence, 4 configuration problem, 1 anything else.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) => 4,
        CliError::Io(_) => 1,
        CliError::Solver(e) => solver_exit_code(e),
    }
}

fn solver_exit_code(err: &SolverError) -> i32 {
    match err {
        SolverError::AtIteration { source, .. } => solver_exit_code(source),
        SolverError::NotCertified(_) | SolverError::ThetaInfeasible(_) => 2,
        SolverError::Diverged(_) => 3,
        SolverError::InvalidArgument(_)
        | SolverError::InvalidParams(_)
        | SolverError::DimensionMismatch(_)
        | SolverError::NotStronglyConvex(_)
        | SolverError::UnsupportedSubproblem(_)
        | SolverError::NotPositiveDefinite(_)
        | SolverError::SingularResolvent { .. } => 4,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&CliError::Config("bad".into())), 4);
        assert_eq!(
            exit_code(&CliError::Solver(SolverError::NotCertified("no".into()))),
            2
        );
        assert_eq!(
            exit_code(&CliError::Solver(SolverError::Diverged("boom".into()))),
            3
        );
        // Divergence deep inside an iteration report keeps its code.
        let nested = SolverError::at_iteration(7, SolverError::Diverged("norm blew up".into()));
        assert_eq!(exit_code(&CliError::Solver(nested)), 3);
        assert_eq!(
            exit_code(&CliError::Solver(SolverError::InvalidParams("l".into()))),
            4
        );
    }
}
