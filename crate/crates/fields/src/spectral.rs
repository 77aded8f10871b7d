use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::field::ComplexField2D;
use crate::grid::Grid2D;

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry((len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
                planner.plan_fft(len, dir)
            })
            .clone()
    })
}

/// In-place unitary 2D DFT on a row-major `(ny, nx)` buffer.
///
/// Unitary convention: both directions carry `1/sqrt(n)` per axis, so
/// `inverse(forward(f)) == f` and Parseval holds without extra factors.
pub fn fft2_unitary(data: &mut [Complex64], ny: usize, nx: usize, inverse: bool) {
    assert_eq!(data.len(), ny * nx, "buffer length must equal ny*nx");
    let row_fft = plan(nx, inverse);
    for row in data.chunks_exact_mut(nx) {
        row_fft.process(row);
    }
    let col_fft = plan(ny, inverse);
    let mut col = vec![Complex64::default(); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        col_fft.process(&mut col);
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
    let scale = 1.0 / ((ny * nx) as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// In-place unitary 3D DFT on a row-major `(nz, ny, nx)` buffer.
pub fn fft3_unitary(data: &mut [Complex64], nz: usize, ny: usize, nx: usize, inverse: bool) {
    assert_eq!(data.len(), nz * ny * nx, "buffer length must equal nz*ny*nx");
    let fx = plan(nx, inverse);
    for line in data.chunks_exact_mut(nx) {
        fx.process(line);
    }
    let fy = plan(ny, inverse);
    let mut line = vec![Complex64::default(); ny.max(nz)];
    for k in 0..nz {
        for i in 0..nx {
            for j in 0..ny {
                line[j] = data[(k * ny + j) * nx + i];
            }
            fy.process(&mut line[..ny]);
            for j in 0..ny {
                data[(k * ny + j) * nx + i] = line[j];
            }
        }
    }
    let fz = plan(nz, inverse);
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                line[k] = data[(k * ny + j) * nx + i];
            }
            fz.process(&mut line[..nz]);
            for k in 0..nz {
                data[(k * ny + j) * nx + i] = line[k];
            }
        }
    }
    let scale = 1.0 / ((nz * ny * nx) as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Spectral coefficients of a 2D field, unitary convention, unshifted
/// layout (mode (0,0) at flat index 0).
#[derive(Debug, Clone)]
pub struct Dft2Coeffs {
    grid: Grid2D,
    data: Vec<Complex64>,
}

impl Dft2Coeffs {
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Coefficient of mode `(kx, ky)` in unshifted index convention.
    pub fn at(&self, kx: usize, ky: usize) -> Complex64 {
        self.data[ky * self.grid.nx() + kx]
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Unitary forward 2D DFT of a complex field.
pub fn dft2_forward(field: &ComplexField2D) -> Dft2Coeffs {
    let g = field.grid();
    let mut data = field.values().to_vec();
    fft2_unitary(&mut data, g.ny(), g.nx(), false);
    Dft2Coeffs { grid: g, data }
}

/// Unitary inverse 2D DFT, the exact inverse of [`dft2_forward`].
pub fn dft2_inverse(coeffs: &Dft2Coeffs) -> ComplexField2D {
    let g = coeffs.grid;
    let mut data = coeffs.data.clone();
    fft2_unitary(&mut data, g.ny(), g.nx(), true);
    ComplexField2D::from_values(g, data).expect("finite by construction")
}
