use scatter_fields::ScalarField2D;

use crate::error::GeoError;

/// 1D Gaussian taps truncated at 4 sigma, normalized to unit sum.
fn kernel_1d(sigma_px: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_px).ceil() as i64;
    let mut w: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Symmetric (reflected) index into `[0, n)`.
fn reflect(idx: i64, n: i64) -> usize {
    let mut k = idx;
    // A couple of folds suffice for kernel radii below the axis length;
    // loop to stay correct for very wide kernels.
    loop {
        if k < 0 {
            k = -k - 1;
        } else if k >= n {
            k = 2 * n - 1 - k;
        } else {
            return k as usize;
        }
    }
}

fn convolve_axis(src: &[f64], nx: usize, ny: usize, taps: &[f64], horizontal: bool) -> Vec<f64> {
    let radius = (taps.len() / 2) as i64;
    let mut out = vec![0.0f64; src.len()];
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                let off = t as i64 - radius;
                let v = if horizontal {
                    src[j * nx + reflect(i as i64 + off, nx as i64)]
                } else {
                    src[reflect(j as i64 + off, ny as i64) * nx + i]
                };
                acc += w * v;
            }
            out[j * nx + i] = acc;
        }
    }
    out
}

/// Separable Gaussian smoothing of a binary salt mask into a fraction
/// field. `sigma_salt` is the physical smoothing scale (meters); the
/// per-axis pixel sigmas are `sigma_salt / dx` and `sigma_salt / dy` of
/// the image grid. Kernels are truncated at 4 sigma and normalized;
/// boundaries are handled by symmetric reflection (constants are
/// preserved exactly, and interior-supported masks keep their total
/// mass). Output is clipped to [0, 1]. With `sigma_salt == 0` the mask
/// is returned unchanged.
pub fn gaussian_blur_fraction(
    mask: &ScalarField2D,
    sigma_salt: f64,
    img_spacings: (f64, f64),
) -> Result<ScalarField2D, GeoError> {
    if sigma_salt < 0.0 {
        return Err(GeoError::InvalidParameter(format!("sigma_salt = {sigma_salt} < 0")));
    }
    if sigma_salt == 0.0 {
        return Ok(mask.clone());
    }
    let (dx, dy) = img_spacings;
    if !(dx > 0.0 && dy > 0.0) {
        return Err(GeoError::InvalidParameter("image spacings must be positive".into()));
    }
    let grid = mask.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let kx = kernel_1d(sigma_salt / dx);
    let ky = kernel_1d(sigma_salt / dy);
    let pass1 = convolve_axis(mask.values(), nx, ny, &kx, true);
    let mut pass2 = convolve_axis(&pass1, nx, ny, &ky, false);
    for v in pass2.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ScalarField2D::from_values(grid, pass2)?)
}
