//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by model construction, bound evaluation, and the optimizer.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor or operation received inputs violating a documented invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Subband index outside `0..M`.
    #[error("subband index {index} out of range for {count} subbands")]
    SubbandIndex { index: usize, count: usize },

    /// A matrix needed for a bound is singular or too ill-conditioned to invert
    /// reliably (condition estimate above the guard threshold).
    #[error("matrix singular or near-singular (condition estimate {cond:.3e})")]
    NearSingular { cond: f64 },

    /// A computation produced a non-finite intermediate value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// The SRL fixed-point search found no sign change of
    /// `sqrt(C_dtau) - dtau` inside the bracket.
    #[error(
        "no SRL fixed point in bracket [{lo:.6e}, {hi:.6e}] ns \
         (scanned residual range [{g_min:.3e}, {g_max:.3e}] ns)"
    )]
    NoSignChange {
        lo: f64,
        hi: f64,
        g_min: f64,
        g_max: f64,
    },

    /// The spectrum constraint polytope is empty (or no feasible initial point
    /// was found). Carries the indices of the violated constraints.
    #[error("infeasible constraint set (violated constraint indices {0:?})")]
    Infeasible(Vec<usize>),

    /// An internal consistency check failed (e.g. a radicand that must be
    /// nonnegative came out significantly negative).
    #[error("internal consistency violation: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
