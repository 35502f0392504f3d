//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on user-supplied data failed (exponent ranges, grid
    /// sizes, mismatched lengths, empty balls, non-finite inputs, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A quadrature routine could not reach its requested tolerance.
    #[error("quadrature stalled at relative error {achieved:.2e} (requested {requested:.2e})")]
    QuadratureTolerance { requested: f64, achieved: f64 },

    /// The descent solver hit its iteration cap before the residual dropped
    /// below tolerance.
    #[error(
        "solver did not converge: scaled residual {residual:.3e} after {iterations} iterations \
         (tolerance {tol:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// The objective or its gradient became non-finite during minimization.
    #[error("objective became non-finite during minimization at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    /// A structural property the approximating sequence must satisfy failed.
    /// `property` names the violated clause (e.g. "nodewise monotonicity").
    #[error("sequence property violated at n = {n}: {property}: {details}")]
    SequenceViolation {
        n: u64,
        property: &'static str,
        details: String,
    },

    /// A failure inside one step of the approximation schedule, wrapping the
    /// underlying cause with the level `n` at which it occurred.
    #[error("approximation step n = {n} failed")]
    Step {
        n: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Shorthand for an [`Error::InvalidInput`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
