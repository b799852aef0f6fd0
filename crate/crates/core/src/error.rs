//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of solvers, certificates and problem constructors.
///
/// The distinction between variants matters to callers: a CLI maps
/// `NotCertified` and `Diverged` to dedicated exit codes, and tests assert
/// on specific variants rather than on message text.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Incompatible vector or matrix dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Cholesky-type factorization failed; the matrix is not positive
    /// definite.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A resolvent was requested at a step size for which it is not
    /// single-valued with full domain, or the underlying solve is singular.
    #[error("resolvent unavailable at step size {gamma}: {reason}")]
    SingularResolvent { gamma: f64, reason: String },

    /// The subproblem does not match any structure the solver handles in
    /// closed form.
    #[error("unsupported subproblem structure: {0}")]
    UnsupportedSubproblem(String),

    /// The regularized subproblem is not strongly convex, so its minimizer
    /// may fail to be unique.
    #[error("subproblem is not strongly convex: {0}")]
    NotStronglyConvex(String),

    /// Step-size or relaxation parameters violate their coupling rules.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// No admissible splitting weights exist for the given moduli, or the
    /// supplied weights violate the feasibility constraints.
    #[error("infeasible splitting weights: {0}")]
    ThetaInfeasible(String),

    /// Convergence certification failed and the caller required it.
    #[error("certification failed: {0}")]
    NotCertified(String),

    /// Iterates left the trust region; the run is reported instead of
    /// silently returning garbage.
    #[error("iteration diverged: {0}")]
    Diverged(String),

    /// A quantity was requested from a state that has not progressed far
    /// enough to define it.
    #[error("state not ready: {0}")]
    NotReady(String),

    /// A failure inside an iterative run, tagged with the iteration at
    /// which it occurred.
    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags an error with the iteration index of an iterative solver.
    pub fn at_iteration(iter: usize, source: Error) -> Error {
        Error::AtIteration { iter, source: Box::new(source) }
    }
}
