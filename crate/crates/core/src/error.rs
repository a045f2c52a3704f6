use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("root bracket expansion exceeded 2^60 times the largest frequency ({what})")]
    BracketFailure { what: String },

    #[error(
        "balance is ambiguous: |1 - S/(M Omega^2)| = {deviation:e} is within the classification \
         tolerance but a non-critical regime was requested"
    )]
    BalanceAmbiguity { deviation: f64 },

    #[error("requested regime {requested} contradicts the computed regime {computed}")]
    RegimeMismatch {
        requested: &'static str,
        computed: &'static str,
    },

    #[error("hybrid frequencies {a} and {b} coincide within tolerance")]
    DegenerateRoots { a: f64, b: f64 },

    #[error("propagator is singular at horizon t = {t}: |Z(t)| = {z:e} (max |Z| = {zmax:e})")]
    CausticAtHorizon { t: f64, z: f64, zmax: f64 },

    #[error("grid step {h} too coarse for frequency scale {freq} (h * freq must be <= 0.2)")]
    StepTooCoarse { h: f64, freq: f64 },

    #[error("quadrature did not converge ({what})")]
    QuadratureStall { what: String },

    #[error("Schrodinger uncertainty {value:e} fell below hbar^2/4 = {floor:e}")]
    UnphysicalResult { value: f64, floor: f64 },

    #[error("full-system flow overflowed at t = {t}")]
    NormOverflow { t: f64 },

    #[error("underdamped Ohmic solution requires Omega_r^2 > gamma0^2 (Omega_r^2 = {omega_r2}, gamma0 = {gamma0})")]
    OverdampedUnsupported { omega_r2: f64, gamma0: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
