use scatter_fields::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use scatter_fields::{fft2_unitary, fft3_unitary, Grid2D, ScalarField2D};

use crate::error::GeoError;
use crate::matern::{matern_cov, matern_spectral_density, MaternParams};

/// Dense-factorization sampler size cap (nodes).
pub const EXACT_MAX_NODES: usize = 256;

/// 3D scalar volume in `(z, y, x)` row-major order with unit (cell)
/// spacing; the source of the 2D salt-geometry slices.
#[derive(Debug, Clone)]
pub struct Volume3 {
    pub nz: usize,
    pub ny: usize,
    pub nx: usize,
    pub data: Vec<f64>,
}

impl Volume3 {
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(k * self.ny + j) * self.nx + i]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.ny * self.nx;
        &self.data[k * n..(k + 1) * n]
    }
}

/// Signed angular frequency of DFT index `idx` on an `m`-point periodic
/// axis with unit spacing.
fn angular_freq(idx: usize, m: usize) -> f64 {
    let signed = if idx <= m / 2 { idx as isize } else { idx as isize - m as isize };
    2.0 * std::f64::consts::PI * signed as f64 / m as f64
}

fn white_noise(n: usize, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect()
}

/// Stationary Matern field on an `ny x nx` cell grid by spectral
/// filtering of white noise on a periodic embedding `embed` times the
/// requested size (cropped afterwards, which removes the wrap-around
/// covariance bias). `ell` is interpreted in cells. Deterministic in the
/// seed.
pub fn sample_grf_spectral_2d(
    grid: Grid2D,
    params: &MaternParams,
    seed: u64,
) -> Result<ScalarField2D, GeoError> {
    sample_grf_spectral_2d_embed(grid, params, seed, 2)
}

pub fn sample_grf_spectral_2d_embed(
    grid: Grid2D,
    params: &MaternParams,
    seed: u64,
    embed: usize,
) -> Result<ScalarField2D, GeoError> {
    let (ny, nx) = (grid.ny(), grid.nx());
    let (my, mx) = (ny * embed.max(1), nx * embed.max(1));
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut buf = white_noise(my * mx, &mut rng);
    fft2_unitary(&mut buf, my, mx, false);
    for ky in 0..my {
        let wy = angular_freq(ky, my);
        for kx in 0..mx {
            let wx = angular_freq(kx, mx);
            let s = matern_spectral_density(wx * wx + wy * wy, params, 2);
            buf[ky * mx + kx] *= s.sqrt();
        }
    }
    fft2_unitary(&mut buf, my, mx, true);
    let mut vals = Vec::with_capacity(ny * nx);
    for j in 0..ny {
        for i in 0..nx {
            vals.push(buf[j * mx + i].re);
        }
    }
    Ok(ScalarField2D::from_values(grid, vals)?)
}

/// 3D variant of [`sample_grf_spectral_2d`]; produces the volume whose
/// thresholded slices become salt masks.
pub fn sample_grf_spectral_3d(
    dims: (usize, usize, usize),
    params: &MaternParams,
    seed: u64,
) -> Volume3 {
    sample_grf_spectral_3d_embed(dims, params, seed, 2)
}

pub fn sample_grf_spectral_3d_embed(
    dims: (usize, usize, usize),
    params: &MaternParams,
    seed: u64,
    embed: usize,
) -> Volume3 {
    let (nz, ny, nx) = dims;
    let (mz, my, mx) = (nz * embed.max(1), ny * embed.max(1), nx * embed.max(1));
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut buf = white_noise(mz * my * mx, &mut rng);
    fft3_unitary(&mut buf, mz, my, mx, false);
    for kz in 0..mz {
        let wz = angular_freq(kz, mz);
        for ky in 0..my {
            let wy = angular_freq(ky, my);
            let row = (kz * my + ky) * mx;
            for kx in 0..mx {
                let wx = angular_freq(kx, mx);
                let s = matern_spectral_density(wx * wx + wy * wy + wz * wz, params, 3);
                buf[row + kx] *= s.sqrt();
            }
        }
    }
    fft3_unitary(&mut buf, mz, my, mx, true);
    let mut data = Vec::with_capacity(nz * ny * nx);
    for k in 0..nz {
        for j in 0..ny {
            let row = (k * my + j) * mx;
            for i in 0..nx {
                data.push(buf[row + i].re);
            }
        }
    }
    Volume3 { nz, ny, nx, data }
}

/// Draws `N(0, K)` exactly at arbitrary points via dense Cholesky with a
/// small jitter; the distributional oracle for the spectral sampler.
pub fn sample_gaussian_exact_at(
    points: &[(f64, f64)],
    params: &MaternParams,
    seed: u64,
) -> Result<Vec<f64>, GeoError> {
    let n = points.len();
    if n > EXACT_MAX_NODES {
        return Err(GeoError::TooLargeForExact { nodes: n, max: EXACT_MAX_NODES });
    }
    let mut k_mat = vec![0.0f64; n * n];
    for p in 0..n {
        for q in 0..=p {
            let d = ((points[p].0 - points[q].0).powi(2) + (points[p].1 - points[q].1).powi(2))
                .sqrt();
            let c = matern_cov(d, params)?;
            k_mat[p * n + q] = c;
            k_mat[q * n + p] = c;
        }
    }
    let jitter = 1e-10 * params.sigma2;
    for p in 0..n {
        k_mat[p * n + p] += jitter;
    }
    let l = cholesky(&mut k_mat, n)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut out = vec![0.0f64; n];
    for p in 0..n {
        let mut acc = 0.0;
        for q in 0..=p {
            acc += l[p * n + q] * z[q];
        }
        out[p] = acc;
    }
    Ok(out)
}

/// Exact sampler on a small grid: node coordinates in physical units, so
/// `ell` must be given in the same units.
pub fn sample_grf_exact(
    grid: Grid2D,
    params: &MaternParams,
    seed: u64,
) -> Result<ScalarField2D, GeoError> {
    let mut points = Vec::with_capacity(grid.num_nodes());
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            points.push((grid.x(i), grid.y(j)));
        }
    }
    let vals = sample_gaussian_exact_at(&points, params, seed)?;
    Ok(ScalarField2D::from_values(grid, vals)?)
}

/// In-place lower Cholesky; returns the factor (same buffer).
fn cholesky(a: &mut [f64], n: usize) -> Result<&[f64], GeoError> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 {
            return Err(GeoError::NotPositiveDefinite { pivot: diag, index: j });
        }
        let dsqrt = diag.sqrt();
        a[j * n + j] = dsqrt;
        for i in j + 1..n {
            let mut acc = a[i * n + j];
            for k in 0..j {
                acc -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = acc / dsqrt;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    Ok(a)
}
