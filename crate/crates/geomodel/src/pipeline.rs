use scatter_fields::{Grid2D, ScalarField2D};

use crate::blur::gaussian_blur_fraction;
use crate::error::GeoError;
use crate::mask::{clean_mask, extract_slice, SaltMaskSpec};
use crate::matern::MaternParams;
use crate::velocity::{build_velocity_pair, VelocityPair};

/// Everything needed to generate one velocity model.
#[derive(Debug, Clone)]
pub struct GeoSpec {
    /// Matern parameters of the 3D field; `ell` in grid cells.
    pub matern: MaternParams,
    /// 3D field dimensions `(nz, ny, nx)`; `(ny, nx)` must match the
    /// image grid.
    pub grf_dims: (usize, usize, usize),
    pub mask: SaltMaskSpec,
    /// Physical interface smoothing scale (meters).
    pub sigma_salt: f64,
    pub v_background: f64,
    pub v_salt: f64,
}

impl Default for GeoSpec {
    fn default() -> Self {
        Self {
            matern: MaternParams { sigma2: 1.0, ell: 10.0, nu: 1.6 },
            grf_dims: (64, 64, 64),
            mask: SaltMaskSpec::default(),
            sigma_salt: 0.0, // set from the image grid by callers; see sigma_salt_px
            v_background: 1500.0,
            v_salt: 4500.0,
        }
    }
}

impl GeoSpec {
    /// Sets the smoothing scale from a pixel count on a given image grid.
    pub fn with_sigma_px(mut self, sigma_px: f64, image_grid: Grid2D) -> Self {
        self.sigma_salt = sigma_px * image_grid.dx();
        self
    }
}

/// One sample, end to end: 3D Matern field, slice selection, mask
/// cleanup, interface blur, velocity pair on the solver grid.
/// Deterministic in `seed`.
pub fn generate_velocity_pair(
    spec: &GeoSpec,
    image_grid: Grid2D,
    solver_grid: Grid2D,
    seed: u64,
) -> Result<VelocityPair, GeoError> {
    spec.mask.validate()?;
    let volume = crate::grf::sample_grf_spectral_3d(spec.grf_dims, &spec.matern, seed);
    // Decouple the slice-start stream from the field stream.
    let slice_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let raw_mask = extract_slice(&volume, image_grid, &spec.mask, slice_seed)?;
    let mask = clean_mask(&raw_mask, &spec.mask)?;
    let alpha = gaussian_blur_fraction(
        &mask,
        spec.sigma_salt,
        (image_grid.dx(), image_grid.dy()),
    )?;
    build_velocity_pair(
        &mask,
        &alpha,
        spec.v_background,
        spec.v_salt,
        solver_grid,
        spec.mask.boundary_margin,
    )
}

/// Recovers the smoothed background from a sharp binary-valued velocity
/// by re-running the data-generation mollifier on its salt indicator:
/// threshold at the midpoint, blur, margin, convex recombination.
///
/// When the sharp velocity came out of [`generate_velocity_pair`] on the
/// same grid (image grid == solver grid), this reproduces the stored
/// `v_bg` and `delta_v` exactly.
pub fn mollify_velocity(
    v: &ScalarField2D,
    spec: &GeoSpec,
) -> Result<(ScalarField2D, ScalarField2D), GeoError> {
    let midpoint = 0.5 * (spec.v_background + spec.v_salt);
    let chi = v.map(|x| if x > midpoint { 1.0 } else { 0.0 })?;
    let alpha = gaussian_blur_fraction(&chi, spec.sigma_salt, (v.grid().dx(), v.grid().dy()))?;
    let pair = build_velocity_pair(
        &chi,
        &alpha,
        spec.v_background,
        spec.v_salt,
        v.grid(),
        spec.mask.boundary_margin,
    )?;
    let delta_v = ScalarField2D::from_values(
        v.grid(),
        v.values().iter().zip(pair.v_bg.values()).map(|(&a, &b)| a - b).collect(),
    )?;
    Ok((pair.v_bg, delta_v))
}
