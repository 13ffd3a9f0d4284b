use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid: {0}")]
    InvalidGrid(String),

    #[error("CFL number {cfl:.6} exceeds 1 (c*dt/dz)")]
    Cfl { cfl: f64 },

    #[error("both control amplitudes vanish, mixing angle theta undefined")]
    DegenerateControl,

    #[error("theta = 0 makes cot^2(theta) diverge")]
    StoppedLimitUndefined,

    #[error("beam law argument {arg:.6} <= 0 at z = {z:.6}, outside the validity window")]
    OutOfValidity { z: f64, arg: f64 },

    #[error("non-finite {field} at z = {z:.6}, t = {t:.6}")]
    NonFinite { field: &'static str, z: f64, t: f64 },

    #[error("Hermite recurrence overflow at n = {n}, x = {x:.4}")]
    HermiteOverflow { n: usize, x: f64 },

    #[error("projection input does not decay at the grid edges (edge/peak = {ratio:.3e})")]
    ProjectionNotConverged { ratio: f64 },

    #[error("truncation residual {residual:.3e} above tolerance {tolerance:.3e}; try N = {suggested:?}")]
    TruncationResidual {
        residual: f64,
        tolerance: f64,
        suggested: Option<usize>,
    },

    #[error("quadrature did not converge after {points} points: {hint}")]
    QuadratureNotConverged { points: usize, hint: String },

    #[error("susceptibility pole at omega = {omega:.6e}")]
    Pole { omega: f64 },

    #[error("singular linear system (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
