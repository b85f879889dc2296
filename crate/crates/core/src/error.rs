use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid too small: need at least {need} nodes per axis, have {have}")]
    GridTooSmall { need: usize, have: usize },
    #[error("ball of radius {radius} at {center:?} escapes the grid box (half-width {half_width})")]
    BallOutsideBox {
        center: Vec<f64>,
        radius: f64,
        half_width: f64,
    },
    #[error("sphere shell at r = {r} contains no grid nodes")]
    EmptyShell { r: f64 },
    #[error("ball does not intersect the grid")]
    EmptyBall,
    #[error("empty sample set")]
    EmptySamples,
    #[error("argument {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("integrand singular at the origin (mu = 0, exponent < 2)")]
    SingularOrigin,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("regularization not convex at eps = {eps}: minimal Hessian eigenvalue {min_eig}")]
    NotConvex { eps: f64, min_eig: f64 },
    #[error("solver failed to converge: {0}")]
    NoConvergence(String),
    #[error("degenerate radial shell: sigma - rho = {width} < 2h = {two_h}")]
    DegenerateShell { width: f64, two_h: f64 },
    #[error("internal error: {0}")]
    Internal(String),
}
