use scatter_fields::FieldError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HelmholtzError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("velocity must be positive everywhere (min found: {min})")]
    NonPositiveVelocity { min: f64 },
    #[error("grid under-resolved: {ppw:.2} points per wavelength < required {required:.2}")]
    UnderResolved { ppw: f64, required: f64 },
    #[error("numerically singular system at column {column} (pivot ratio {pivot_ratio:.3e})")]
    SingularMatrix { column: usize, pivot_ratio: f64 },
    #[error("source node {0} is not an interior node")]
    NotInteriorNode(usize),
    #[error("grid {nx}x{ny} too large for the Lippmann-Schwinger check (max {max} per axis)")]
    GridTooLarge { nx: usize, ny: usize, max: usize },
    #[error("degenerate source: zero norm")]
    DegenerateSource,
    #[error("iterative solver stalled: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
}
