use num_complex::Complex64;
use scatter_fields::{ComplexField2D, Grid2D, ScalarField2D};

use crate::error::HelmholtzError;
use crate::system::{assemble, RobinData};

/// Manufactured-solution case used by the convergence study:
/// `p*(x, y) = sin(b y) exp(i a x)`, which vanishes on the free surface
/// (y = 0) and carries inhomogeneous Robin data on the absorbing edges.
/// The wavespeed is smooth and gently varying.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub lx: f64,
    pub ly: f64,
    pub omega: f64,
    pub v0: f64,
    a: f64,
    b: f64,
}

impl ManufacturedCase {
    pub fn new(lx: f64, ly: f64, omega: f64, v0: f64) -> Self {
        // Non-grid-aligned wavenumbers avoid accidental superconvergence.
        let a = 2.0 * std::f64::consts::PI * 1.5 / lx;
        let b = 2.0 * std::f64::consts::PI * 1.25 / ly;
        Self { lx, ly, omega, v0, a, b }
    }

    pub fn velocity(&self, grid: Grid2D) -> ScalarField2D {
        let (lx, ly, v0) = (self.lx, self.ly, self.v0);
        ScalarField2D::from_fn(grid, |x, y| {
            v0 * (1.0
                + 0.15
                    * (2.0 * std::f64::consts::PI * x / lx).sin()
                    * (std::f64::consts::PI * y / ly).sin())
        })
        .expect("finite")
    }

    pub fn exact(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(0.0, self.a * x).exp() * (self.b * y).sin()
    }

    fn grad_x(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(0.0, self.a) * self.exact(x, y)
    }

    fn grad_y(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(0.0, self.a * x).exp() * self.b * (self.b * y).cos()
    }

    /// Continuum forcing `s = -(lap p* + omega^2 / v^2 p*)`.
    fn forcing(&self, x: f64, y: f64, v: f64) -> Complex64 {
        let k2 = self.omega * self.omega / (v * v);
        self.exact(x, y) * (self.a * self.a + self.b * self.b - k2)
    }

    /// Relative L2 error of the discrete solution against `p*` on an
    /// `n x n` grid, with exact continuum forcing and exact Robin data
    /// injected on the absorbing edges.
    pub fn solve_error(&self, n: usize) -> Result<f64, HelmholtzError> {
        let grid = Grid2D::new(n, n, self.lx, self.ly)?;
        let velocity = self.velocity(grid);
        let system = assemble(&velocity, self.omega, grid)?;

        let mut source = ComplexField2D::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = (grid.x(i), grid.y(j));
                let k = grid.idx(i, j);
                source.values_mut()[k] = self.forcing(x, y, velocity.at(i, j));
            }
        }
        let mut robin = RobinData::zeros(grid);
        for j in 0..grid.ny() {
            let y = grid.y(j);
            let iw_left = Complex64::new(0.0, self.omega / velocity.at(0, j));
            robin.left[j] = -self.grad_x(0.0, y) - iw_left * self.exact(0.0, y);
            let iw_right = Complex64::new(0.0, self.omega / velocity.at(grid.nx() - 1, j));
            robin.right[j] = self.grad_x(self.lx, y) - iw_right * self.exact(self.lx, y);
        }
        for i in 0..grid.nx() {
            let x = grid.x(i);
            let iw = Complex64::new(0.0, self.omega / velocity.at(i, grid.ny() - 1));
            robin.bottom[i] = self.grad_y(x, self.ly) - iw * self.exact(x, self.ly);
        }

        let b = system.rhs_with_robin_data(&source, &robin);
        let factor = system.factor()?;
        let p = factor.solve(b);

        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let truth = self.exact(grid.x(i), grid.y(j));
                let got = p[grid.idx(i, j)];
                num += (got - truth).norm_sqr();
                den += truth.norm_sqr();
            }
        }
        Ok((num / den).sqrt())
    }
}

/// Observed convergence orders between consecutive grid sizes:
/// `order_k = log(e_k / e_{k+1}) / log(h_k / h_{k+1})`.
pub fn convergence_orders(
    case: &ManufacturedCase,
    sizes: &[usize],
) -> Result<(Vec<f64>, Vec<f64>), HelmholtzError> {
    let mut errors = Vec::with_capacity(sizes.len());
    for &n in sizes {
        errors.push(case.solve_error(n)?);
    }
    let mut orders = Vec::new();
    for k in 0..sizes.len() - 1 {
        let h0 = 1.0 / (sizes[k] - 1) as f64;
        let h1 = 1.0 / (sizes[k + 1] - 1) as f64;
        orders.push((errors[k] / errors[k + 1]).ln() / (h0 / h1).ln());
    }
    Ok((errors, orders))
}
