//! Procedural velocity-model generation: Matern Gaussian random fields
//! (spectral sampler with a dense-Cholesky oracle), salt-mask extraction
//! from thresholded 3D fields, morphological cleanup, Gaussian interface
//! blur, and the sharp/smoothed velocity pair construction.

mod bessel;
mod blur;
mod error;
mod grf;
mod mask;
mod matern;
mod pipeline;
mod velocity;

pub use bessel::bessel_k;
pub use blur::gaussian_blur_fraction;
pub use error::GeoError;
pub use grf::{
    sample_gaussian_exact_at, sample_grf_exact, sample_grf_spectral_2d,
    sample_grf_spectral_2d_embed, sample_grf_spectral_3d, sample_grf_spectral_3d_embed, Volume3,
    EXACT_MAX_NODES,
};
pub use mask::{clean_mask, extract_slice, threshold_to_mask, SaltMaskSpec};
pub use matern::{matern_cov, matern_spectral_density, MaternParams};
pub use pipeline::{generate_velocity_pair, mollify_velocity, GeoSpec};
pub use velocity::{build_velocity_pair, VelocityPair};
