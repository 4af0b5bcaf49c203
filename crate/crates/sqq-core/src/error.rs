//! Crate-wide error type.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(&'static str),
    /// More interpolation nodes than the conditioning cap allows.
    ConditioningLimit { count: usize, max: usize },
    /// The Vandermonde solve failed its residual check.
    IllConditioned { residual: f64 },
    /// Interpolation nodes are not pairwise distinct.
    DuplicateNodes,
    /// A step interval with `end <= start`.
    InvalidInterval { start: f64, end: f64 },
    /// Two bodies coincide with zero softening.
    Singularity { body_a: usize, body_b: usize },
    /// The radicand of the energy control function is not positive,
    /// i.e. the recorded initial energy is inconsistent with the
    /// configuration.
    NonpositiveRadicand { value: f64 },
    /// A dense factorization hit an exactly singular pivot.
    SingularMatrix,
    /// A NaN or infinity showed up where a finite value is required.
    NonFinite(&'static str),
    /// The step solver hit its iteration cap. Carries the best iterate.
    NonConvergence {
        iterations: usize,
        relative_error: f64,
        residual_norm: f64,
        best: Vec<f64>,
    },
    /// The Broyden denominator collapsed twice within one solve.
    DegenerateUpdate,
    /// A trajectory step failed; wraps the underlying error with context.
    StepFailed {
        step_index: u64,
        time: f64,
        source: Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::ConditioningLimit { count, max } => write!(
                f,
                "{count} interpolation nodes exceed the conditioning cap of {max}"
            ),
            Error::IllConditioned { residual } => write!(
                f,
                "basis solve failed the residual check (residual {residual:.3e})"
            ),
            Error::DuplicateNodes => write!(f, "interpolation nodes must be pairwise distinct"),
            Error::InvalidInterval { start, end } => {
                write!(f, "invalid interval: [{start}, {end}]")
            }
            Error::Singularity { body_a, body_b } => write!(
                f,
                "bodies {body_a} and {body_b} coincide (zero softening)"
            ),
            Error::NonpositiveRadicand { value } => write!(
                f,
                "energy control radicand is not positive ({value:.3e}); \
                 H0 is inconsistent with the configuration"
            ),
            Error::SingularMatrix => write!(f, "singular matrix"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::NonConvergence {
                iterations,
                relative_error,
                residual_norm,
                ..
            } => write!(
                f,
                "solver did not converge in {iterations} iterations \
                 (relative error {relative_error:.3e}, residual {residual_norm:.3e})"
            ),
            Error::DegenerateUpdate => {
                write!(f, "degenerate quasi-Newton update denominator")
            }
            Error::StepFailed {
                step_index,
                time,
                source,
            } => write!(f, "step {step_index} at t = {time:.6e} failed: {source}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
