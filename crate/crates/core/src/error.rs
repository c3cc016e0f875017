use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
///
/// Variants are grouped by what the caller can do about them: bad input,
/// a violated mathematical precondition, or a numerical resolution problem.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("phase-space matrices must have even dimension, got {0}")]
    OddDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `det(1 - M)` is below the singularity threshold, so the covariant
    /// symbol formula does not apply.
    #[error("1 is an eigenvalue of the symplectic matrix (|det(1-M)| = {det:e})")]
    EigenvalueOne { det: f64 },

    #[error("internal invariant violated: {0}")]
    InternalInvariantViolated(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("symplecticity lost: drift {drift:e} at t = {t} (reduce dt)")]
    SymplecticityLost { drift: f64, t: f64 },

    #[error("complex Hill solution vanished at t = {t}")]
    ZeroCrossing { t: f64 },

    #[error("phase jump of {jump} rad per step while unwrapping (reduce dt)")]
    PhaseUnwrap { jump: f64 },

    #[error("square-root radicand passed within {modulus:e} of zero at t = {t}")]
    BranchAmbiguity { t: f64, modulus: f64 },

    #[error("reference width a = {0} is not positive")]
    NonPositiveWidth(f64),

    #[error("Floquet data is unstable (|tr M| = {trace_abs})")]
    Unstable { trace_abs: f64 },

    #[error("wavepacket tail {tail:e} at the grid boundary exceeds 1e-12")]
    TailClipped { tail: f64 },

    #[error("grid under-resolved: {0}")]
    Underresolved(String),

    #[error("norm drifted by {drift:e} during propagation")]
    NormLost { drift: f64 },

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("potential is not confining: eigenstate {index} has boundary tail {tail:e}")]
    NotConfining { index: usize, tail: f64 },

    #[error("phase-space box too small: tail estimate {ratio:e} of the value")]
    TruncationTooTight { ratio: f64 },

    #[error("eigenbasis has no perturbation matrix attached")]
    MissingVMatrix,

    #[error("truncated basis misses {defect:e} of <V^2> for state {index}")]
    BasisTooSmall { index: usize, defect: f64 },

    #[error("gradient vanishes on the energy shell near {0:?}")]
    GradientVanishes(Vec<f64>),

    #[error("no eigenvalue in the energy window [{alpha}, {beta}]")]
    EmptyWindow { alpha: f64, beta: f64 },

    #[error("Hamiltonian is not of the form P^2/2 + V(Q, t)")]
    NotSeparable,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed dump: {0}")]
    MalformedDump(String),

    #[error("Mandelstam-Tamm bound violated at t = {t}: {overlap_sq} < {bound}")]
    MandelstamTammViolated { t: f64, overlap_sq: f64, bound: f64 },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True when the error signals a violated mathematical hypothesis rather
    /// than a numerical or input problem.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::EigenvalueOne { .. }
                | Error::NonPositiveWidth(_)
                | Error::Unstable { .. }
                | Error::ZeroCrossing { .. }
                | Error::GradientVanishes(_)
                | Error::BranchAmbiguity { .. }
                | Error::EmptyWindow { .. }
                | Error::NotSeparable
        )
    }
}
