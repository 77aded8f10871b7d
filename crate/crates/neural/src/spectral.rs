use std::sync::Arc;

use ndarray::ArrayView2;

/// Truncated-DFT bases for one `(ny, nx, modes_y, modes_x)` geometry.
///
/// The x axis keeps the non-negative half-spectrum `kx in 0..mx`; the y
/// axis keeps `my` signed frequencies (`ceil(my/2)` non-negative,
/// `floor(my/2)` negative) - the low-frequency corner blocks of the
/// unshifted spectrum. Transforms are unitary. The output path
/// reconstructs with per-mode Hermitian multipliers (2 where a mode's
/// conjugate mirror was dropped by the truncation, 1 where the mirror is
/// itself kept), which makes `inverse(forward(x))` the exact orthogonal
/// projection of a real field onto the retained band: identity weights
/// act as the identity on band-limited inputs.
///
/// Evaluating the truncated transform as dense matrix products instead
/// of a full FFT is exact and fast at the small mode counts used here.
pub struct SpectralBasis {
    pub ny: usize,
    pub nx: usize,
    pub my: usize,
    pub mx: usize,
    /// Forward x basis, `(nx, mx)`: `exp(-2 pi i n kx / nx) / sqrt(nx)`.
    ex_re: Vec<f64>,
    ex_im: Vec<f64>,
    /// Forward y basis, `(my, ny)`.
    ey_re: Vec<f64>,
    ey_im: Vec<f64>,
    /// Inverse y basis `(ny, my)` (conjugate transpose of `ey`).
    iy_re: Vec<f64>,
    iy_im: Vec<f64>,
    /// Inverse x basis `(mx, nx)` (conjugate transpose of `ex`).
    ix_re: Vec<f64>,
    ix_im: Vec<f64>,
    /// Per-mode Hermitian completion multiplier, `(my, mx)`.
    herm: Vec<f64>,
}

/// Signed y frequencies kept for `my` retained modes.
pub fn signed_y_freqs(my: usize) -> Vec<isize> {
    let pos = my.div_ceil(2);
    let neg = my / 2;
    let mut f: Vec<isize> = (0..pos as isize).collect();
    f.extend((1..=neg as isize).map(|k| -k));
    f
}

/// Clips a requested mode count to the grid Nyquist `floor(n/2)`.
pub fn clip_modes(requested: usize, n: usize) -> usize {
    requested.min(n / 2).max(1)
}

impl SpectralBasis {
    pub fn new(ny: usize, nx: usize, my: usize, mx: usize) -> Arc<Self> {
        assert!(mx <= nx / 2 && my <= ny / 2, "modes must be clipped to the Nyquist");
        let sx = 1.0 / (nx as f64).sqrt();
        let sy = 1.0 / (ny as f64).sqrt();
        let mut ex_re = vec![0.0; nx * mx];
        let mut ex_im = vec![0.0; nx * mx];
        for n in 0..nx {
            for k in 0..mx {
                let phase = -2.0 * std::f64::consts::PI * (n * k) as f64 / nx as f64;
                ex_re[n * mx + k] = phase.cos() * sx;
                ex_im[n * mx + k] = phase.sin() * sx;
            }
        }
        let freqs = signed_y_freqs(my);
        let mut ey_re = vec![0.0; my * ny];
        let mut ey_im = vec![0.0; my * ny];
        for (m, &f) in freqs.iter().enumerate() {
            for n in 0..ny {
                let phase = -2.0 * std::f64::consts::PI * (n as isize * f) as f64 / ny as f64;
                ey_re[m * ny + n] = phase.cos() * sy;
                ey_im[m * ny + n] = phase.sin() * sy;
            }
        }
        let mut iy_re = vec![0.0; ny * my];
        let mut iy_im = vec![0.0; ny * my];
        for m in 0..my {
            for n in 0..ny {
                iy_re[n * my + m] = ey_re[m * ny + n];
                iy_im[n * my + m] = -ey_im[m * ny + n];
            }
        }
        let mut ix_re = vec![0.0; mx * nx];
        let mut ix_im = vec![0.0; mx * nx];
        for n in 0..nx {
            for k in 0..mx {
                ix_re[k * nx + n] = ex_re[n * mx + k];
                ix_im[k * nx + n] = -ex_im[n * mx + k];
            }
        }
        // A mode's mirror is (-ky, -kx) mod n; the multiplier is 1 when
        // the mirror is itself in the kept set (kx = 0 and -ky kept),
        // else 2.
        let mut herm = vec![2.0; my * mx];
        for (m, &f) in freqs.iter().enumerate() {
            if freqs.contains(&(-f)) {
                herm[m * mx] = 1.0; // kx = 0 column only
            }
        }
        Arc::new(Self {
            ny,
            nx,
            my,
            mx,
            ex_re,
            ex_im,
            ey_re,
            ey_im,
            iy_re,
            iy_im,
            ix_re,
            ix_im,
            herm,
        })
    }

    /// Hermitian multipliers, `(my, mx)` flat.
    pub fn herm(&self) -> &[f64] {
        &self.herm
    }

    /// Forward truncated transform of `channels` stacked real planes:
    /// input `(c, ny, nx)` flat, output complex `(c, my, mx)` as (re, im).
    pub fn forward_real(&self, x: &[f64], channels: usize) -> (Vec<f64>, Vec<f64>) {
        let (ny, nx, my, mx) = (self.ny, self.nx, self.my, self.mx);
        debug_assert_eq!(x.len(), channels * ny * nx);
        let xa = ArrayView2::from_shape((channels * ny, nx), x).unwrap();
        let exr = ArrayView2::from_shape((nx, mx), &self.ex_re).unwrap();
        let exi = ArrayView2::from_shape((nx, mx), &self.ex_im).unwrap();
        let t1r = xa.dot(&exr);
        let t1i = xa.dot(&exi);
        let eyr = ArrayView2::from_shape((my, ny), &self.ey_re).unwrap();
        let eyi = ArrayView2::from_shape((my, ny), &self.ey_im).unwrap();
        let mut out_re = Vec::with_capacity(channels * my * mx);
        let mut out_im = Vec::with_capacity(channels * my * mx);
        let t1r = t1r.as_standard_layout();
        let t1i = t1i.as_standard_layout();
        let t1r = t1r.as_slice().unwrap();
        let t1i = t1i.as_slice().unwrap();
        for c in 0..channels {
            let br = ArrayView2::from_shape((ny, mx), &t1r[c * ny * mx..(c + 1) * ny * mx])
                .unwrap();
            let bi = ArrayView2::from_shape((ny, mx), &t1i[c * ny * mx..(c + 1) * ny * mx])
                .unwrap();
            let rr = eyr.dot(&br) - eyi.dot(&bi);
            let ri = eyr.dot(&bi) + eyi.dot(&br);
            out_re.extend(rr.iter());
            out_im.extend(ri.iter());
        }
        (out_re, out_im)
    }

    fn inverse_impl(&self, hat_re: &[f64], hat_im: &[f64], channels: usize, scaled: bool) -> Vec<f64> {
        let (ny, nx, my, mx) = (self.ny, self.nx, self.my, self.mx);
        debug_assert_eq!(hat_re.len(), channels * my * mx);
        let iyr = ArrayView2::from_shape((ny, my), &self.iy_re).unwrap();
        let iyi = ArrayView2::from_shape((ny, my), &self.iy_im).unwrap();
        let ixr = ArrayView2::from_shape((mx, nx), &self.ix_re).unwrap();
        let ixi = ArrayView2::from_shape((mx, nx), &self.ix_im).unwrap();
        let mut out = Vec::with_capacity(channels * ny * nx);
        let mut sr = vec![0.0f64; my * mx];
        let mut si = vec![0.0f64; my * mx];
        for c in 0..channels {
            let block = c * my * mx..(c + 1) * my * mx;
            if scaled {
                for (k, t) in block.clone().enumerate() {
                    sr[k] = hat_re[t] * self.herm[k];
                    si[k] = hat_im[t] * self.herm[k];
                }
            } else {
                sr.copy_from_slice(&hat_re[block.clone()]);
                si.copy_from_slice(&hat_im[block.clone()]);
            }
            let hr = ArrayView2::from_shape((my, mx), &sr).unwrap();
            let hi = ArrayView2::from_shape((my, mx), &si).unwrap();
            let zr = iyr.dot(&hr) - iyi.dot(&hi);
            let zi = iyr.dot(&hi) + iyi.dot(&hr);
            let yr = zr.dot(&ixr) - zi.dot(&ixi);
            out.extend(yr.iter());
        }
        out
    }

    /// Output-path inverse with Hermitian multipliers; real `(c, ny, nx)`.
    pub fn inverse_scaled(&self, hat_re: &[f64], hat_im: &[f64], channels: usize) -> Vec<f64> {
        self.inverse_impl(hat_re, hat_im, channels, true)
    }

    /// Plain adjoint inverse (no multipliers); the gradient path.
    pub fn inverse_plain(&self, hat_re: &[f64], hat_im: &[f64], channels: usize) -> Vec<f64> {
        self.inverse_impl(hat_re, hat_im, channels, false)
    }

    /// Orthogonal projection of a real stack onto the retained band.
    pub fn project(&self, x: &[f64], channels: usize) -> Vec<f64> {
        let (hr, hi) = self.forward_real(x, channels);
        self.inverse_scaled(&hr, &hi, channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scatter_fields::{dft2_forward, Complex64, ComplexField2D, Grid2D};

    #[test]
    fn forward_matches_full_dft_on_kept_modes() {
        let (ny, nx, my, mx) = (8usize, 8usize, 4usize, 3usize);
        let basis = SpectralBasis::new(ny, nx, my, mx);
        let vals: Vec<f64> = (0..ny * nx).map(|k| ((k * 37 % 11) as f64) - 5.0).collect();
        let (hr, hi) = basis.forward_real(&vals, 1);

        let grid = Grid2D::new(nx, ny, 1.0, 1.0).unwrap();
        let field = ComplexField2D::from_values(
            grid,
            vals.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
        .unwrap();
        let coeffs = dft2_forward(&field);
        for (m, &fy) in signed_y_freqs(my).iter().enumerate() {
            let ky = if fy >= 0 { fy as usize } else { (ny as isize + fy) as usize };
            for kx in 0..mx {
                let want = coeffs.at(kx, ky);
                let got = Complex64::new(hr[m * mx + kx], hi[m * mx + kx]);
                assert!((want - got).norm() < 1e-12, "mode ({kx},{ky}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn band_projection_is_idempotent_and_identity_on_range() {
        let (ny, nx, my, mx) = (8usize, 8usize, 4usize, 3usize);
        let basis = SpectralBasis::new(ny, nx, my, mx);
        let vals: Vec<f64> = (0..ny * nx).map(|k| (k as f64 * 0.37).sin()).collect();
        let proj = basis.project(&vals, 1);
        let proj2 = basis.project(&proj, 1);
        let max_err =
            proj.iter().zip(&proj2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-12, "projection not idempotent: {max_err}");
        // Projection reduces energy (orthogonal projection).
        let e_in: f64 = vals.iter().map(|v| v * v).sum();
        let e_out: f64 = proj.iter().map(|v| v * v).sum();
        assert!(e_out <= e_in + 1e-12);
    }

    #[test]
    fn projection_preserves_bandlimited_cosine() {
        // cos(2 pi (x + y) / n) lives at modes (ky=1, kx=1) and mirror.
        let (ny, nx) = (8usize, 8usize);
        let basis = SpectralBasis::new(ny, nx, 4, 3);
        let mut vals = vec![0.0f64; ny * nx];
        for j in 0..ny {
            for i in 0..nx {
                vals[j * nx + i] = (2.0 * std::f64::consts::PI * (i as f64 + j as f64)
                    / nx as f64)
                    .cos()
                    + 0.5;
            }
        }
        let proj = basis.project(&vals, 1);
        let max_err = vals.iter().zip(&proj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-12, "band-limited field altered by projection: {max_err}");
    }
}
