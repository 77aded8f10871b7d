use scatter_fields::FieldError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative distance {0} passed to a covariance kernel")]
    NegativeDistance(f64),
    #[error("degenerate field: all values equal, no threshold exists")]
    DegenerateField,
    #[error("covariance matrix not positive definite even after jitter (pivot {pivot:.3e} at {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("grid too large for dense sampling: {nodes} nodes (max {max})")]
    TooLargeForExact { nodes: usize, max: usize },
    #[error("volume/grid shape mismatch: volume is {vnx}x{vny} per slice, grid is {gnx}x{gny}")]
    VolumeGridMismatch { vnx: usize, vny: usize, gnx: usize, gny: usize },
}
