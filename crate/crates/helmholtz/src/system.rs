use std::io::Write;

use num_complex::Complex64;
use scatter_fields::{ComplexField2D, Grid2D, ScalarField2D};

use crate::band::{BandLu, BandMatrix};
use crate::error::HelmholtzError;

/// Per-node boundary classification on the mixed-boundary layout:
/// Dirichlet (p = 0) along the top edge, first-order absorbing Robin
/// rows on the other three edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    AbcLeft,
    AbcRight,
    AbcBottom,
    FreeTop,
    /// Bottom corners where two absorbing edges meet.
    CornerAbc,
}

/// Boundary layout selector. `AllDirichlet` is a test hook: with
/// `omega = 0` the assembled interior block is the plain discrete
/// Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryLayout {
    MixedPaper,
    AllDirichlet,
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub layout: BoundaryLayout,
    /// Minimum points per wavelength at `min(v)`; below this the system
    /// records a warning (or errors when `under_resolution_is_error`).
    pub ppw_min: f64,
    pub under_resolution_is_error: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self { layout: BoundaryLayout::MixedPaper, ppw_min: 10.0, under_resolution_is_error: false }
    }
}

/// Inhomogeneous Robin data `d_nu p - (i omega / v) p = g` per absorbing
/// edge, used by manufactured-solution studies. Entries are indexed by
/// the running coordinate along each edge (`j` for left/right, `i` for
/// bottom).
#[derive(Debug, Clone)]
pub struct RobinData {
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    pub bottom: Vec<Complex64>,
}

impl RobinData {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            left: vec![Complex64::default(); grid.ny()],
            right: vec![Complex64::default(); grid.ny()],
            bottom: vec![Complex64::default(); grid.nx()],
        }
    }
}

/// Assembled sparse system for the frequency-domain problem.
///
/// Row convention: the stored matrix `A` satisfies `A p = -s_vec` where
/// `s_vec` is produced by [`rhs_from_source`](Self::rhs_from_source).
/// Boundary rows are scaled by 1/2 per absorbing edge (1/4 at absorbing
/// corners) after ghost-node elimination, which keeps `A` complex
/// symmetric (`A = A^T`). Dirichlet rows are identity rows with their
/// columns eliminated.
pub struct HelmholtzSystem {
    grid: Grid2D,
    omega: f64,
    velocity: ScalarField2D,
    indptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<Complex64>,
    tags: Vec<BoundaryTag>,
    /// Row scaling applied to the PDE rows; 0 marks Dirichlet rows.
    weights: Vec<f64>,
    ppw: f64,
    warnings: Vec<String>,
}

pub fn assemble(
    velocity: &ScalarField2D,
    omega: f64,
    grid: Grid2D,
) -> Result<HelmholtzSystem, HelmholtzError> {
    assemble_with(velocity, omega, grid, &AssembleOptions::default())
}

pub fn assemble_with(
    velocity: &ScalarField2D,
    omega: f64,
    grid: Grid2D,
    opts: &AssembleOptions,
) -> Result<HelmholtzSystem, HelmholtzError> {
    if velocity.grid() != grid {
        return Err(scatter_fields::FieldError::GridMismatch(
            velocity.grid().nx(),
            velocity.grid().ny(),
            grid.nx(),
            grid.ny(),
        )
        .into());
    }
    if grid.nx() < 4 || grid.ny() < 4 {
        return Err(scatter_fields::FieldError::Domain(format!(
            "solver grid needs nx, ny >= 4, got {}x{}",
            grid.nx(),
            grid.ny()
        ))
        .into());
    }
    let vmin = velocity.min();
    if !(vmin > 0.0) {
        return Err(HelmholtzError::NonPositiveVelocity { min: vmin });
    }

    let mut warnings = Vec::new();
    let h = grid.dx().max(grid.dy());
    let ppw = if omega > 0.0 {
        let freq = omega / (2.0 * std::f64::consts::PI);
        vmin / freq / h
    } else {
        f64::INFINITY
    };
    if ppw < opts.ppw_min {
        if opts.under_resolution_is_error {
            return Err(HelmholtzError::UnderResolved { ppw, required: opts.ppw_min });
        }
        warnings.push(format!(
            "under-resolved: {ppw:.2} points per wavelength (< {:.2})",
            opts.ppw_min
        ));
    }

    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let (ix2, iy2) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    let n = grid.num_nodes();

    let is_dirichlet = |i: usize, j: usize| -> bool {
        match opts.layout {
            BoundaryLayout::MixedPaper => j == 0,
            BoundaryLayout::AllDirichlet => i == 0 || i == nx - 1 || j == 0 || j == ny - 1,
        }
    };

    let mut indptr = Vec::with_capacity(n + 1);
    let mut cols: Vec<u32> = Vec::with_capacity(5 * n);
    let mut vals: Vec<Complex64> = Vec::with_capacity(5 * n);
    let mut tags = vec![BoundaryTag::Interior; n];
    let mut weights = vec![1.0f64; n];
    indptr.push(0);

    for j in 0..ny {
        for i in 0..nx {
            let row = grid.idx(i, j);
            if is_dirichlet(i, j) {
                tags[row] = BoundaryTag::FreeTop;
                weights[row] = 0.0;
                cols.push(row as u32);
                vals.push(Complex64::new(1.0, 0.0));
                indptr.push(cols.len() as u32);
                continue;
            }
            let v = velocity.at(i, j);
            let robin = opts.layout == BoundaryLayout::MixedPaper;
            let left = robin && i == 0;
            let right = robin && i == nx - 1;
            let bottom = robin && j == ny - 1;
            let n_abc = left as u32 + right as u32 + bottom as u32;
            tags[row] = match (left, right, bottom) {
                (true, false, false) => BoundaryTag::AbcLeft,
                (false, true, false) => BoundaryTag::AbcRight,
                (false, false, true) => BoundaryTag::AbcBottom,
                (false, false, false) => BoundaryTag::Interior,
                _ => BoundaryTag::CornerAbc,
            };
            let w = 0.5f64.powi(n_abc as i32);
            weights[row] = w;

            // Ghost-node elimination folds each absorbing edge into the
            // diagonal as 2 i omega / (v d) along that edge's normal.
            let mut diag = Complex64::new(-2.0 * ix2 - 2.0 * iy2 + omega * omega / (v * v), 0.0);
            if left || right {
                diag += Complex64::new(0.0, 2.0 * omega / (v * dx));
            }
            if bottom {
                diag += Complex64::new(0.0, 2.0 * omega / (v * dy));
            }
            let mut push = |c: usize, val: Complex64| {
                cols.push(c as u32);
                vals.push(val * w);
            };

            // y-: neighbor (i, j-1); dropped when it is a Dirichlet row.
            if j > 0 {
                let coeff = if bottom { 2.0 * iy2 } else { iy2 };
                if !is_dirichlet(i, j - 1) {
                    push(grid.idx(i, j - 1), Complex64::new(coeff, 0.0));
                }
            }
            // x-: neighbor (i-1, j).
            if i > 0 {
                let coeff = if right { 2.0 * ix2 } else { ix2 };
                if !is_dirichlet(i - 1, j) {
                    push(grid.idx(i - 1, j), Complex64::new(coeff, 0.0));
                }
            }
            push(row, diag);
            // x+: neighbor (i+1, j).
            if i < nx - 1 {
                let coeff = if left { 2.0 * ix2 } else { ix2 };
                if !is_dirichlet(i + 1, j) {
                    push(grid.idx(i + 1, j), Complex64::new(coeff, 0.0));
                }
            }
            // y+: neighbor (i, j+1).
            if j < ny - 1 {
                let coeff = iy2;
                if !is_dirichlet(i, j + 1) {
                    push(grid.idx(i, j + 1), Complex64::new(coeff, 0.0));
                }
            }
            indptr.push(cols.len() as u32);
        }
    }

    Ok(HelmholtzSystem {
        grid,
        omega,
        velocity: velocity.clone(),
        indptr,
        cols,
        vals,
        tags,
        weights,
        ppw,
        warnings,
    })
}

impl HelmholtzSystem {
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn velocity(&self) -> &ScalarField2D {
        &self.velocity
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points_per_wavelength(&self) -> f64 {
        self.ppw
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn num_rows(&self) -> usize {
        self.grid.num_nodes()
    }

    pub fn entry_count(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (s, e) = (self.indptr[r] as usize, self.indptr[r + 1] as usize);
        self.cols[s..e].iter().map(|&c| c as usize).zip(self.vals[s..e].iter().copied())
    }

    /// Adds to the diagonal entry of row `r` (shifted-operator
    /// preconditioners).
    pub fn add_to_diagonal(&mut self, r: usize, v: Complex64) {
        let (s, e) = (self.indptr[r] as usize, self.indptr[r + 1] as usize);
        for k in s..e {
            if self.cols[k] as usize == r {
                self.vals[k] += v;
                return;
            }
        }
        panic!("row {r} has no diagonal entry");
    }

    /// Matrix entry `(r, c)`, zero when outside the sparsity pattern.
    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|(cc, _)| *cc == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    /// `A x` via the stored pattern.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.num_rows());
        let mut y = vec![Complex64::default(); x.len()];
        for r in 0..self.num_rows() {
            let (s, e) = (self.indptr[r] as usize, self.indptr[r + 1] as usize);
            let mut acc = Complex64::default();
            for k in s..e {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
        y
    }

    /// Largest `|A[r][c] - A[c][r]|` over the pattern; exact 0 certifies
    /// complex symmetry.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.num_rows() {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.entry(c, r)).norm());
            }
        }
        worst
    }

    /// Right-hand side vector for `A p = -s_vec`: `-w_k * s_k` on PDE
    /// rows, zero on Dirichlet rows.
    pub fn rhs_from_source(&self, source: &ComplexField2D) -> Vec<Complex64> {
        assert_eq!(source.grid(), self.grid);
        source
            .values()
            .iter()
            .zip(&self.weights)
            .map(|(s, &w)| -s * w)
            .collect()
    }

    /// Right-hand side with inhomogeneous Robin data (manufactured
    /// solutions): each absorbing edge contributes `-w * 2 g / d` along
    /// its normal spacing.
    pub fn rhs_with_robin_data(&self, source: &ComplexField2D, data: &RobinData) -> Vec<Complex64> {
        let mut b = self.rhs_from_source(source);
        let grid = self.grid;
        let (nx, ny) = (grid.nx(), grid.ny());
        for j in 0..ny {
            for i in 0..nx {
                let row = grid.idx(i, j);
                if self.weights[row] == 0.0 {
                    continue;
                }
                let w = self.weights[row];
                let mut extra = Complex64::default();
                if i == 0 {
                    extra += data.left[j] * (2.0 / grid.dx());
                }
                if i == nx - 1 {
                    extra += data.right[j] * (2.0 / grid.dx());
                }
                if j == ny - 1 {
                    extra += data.bottom[i] * (2.0 / grid.dy());
                }
                b[row] -= extra * w;
            }
        }
        b
    }

    /// Factorizes into a reusable banded LU.
    pub fn factor(&self) -> Result<HelmholtzFactor, HelmholtzError> {
        let bw = self.grid.nx();
        let mut band = BandMatrix::zeros(self.num_rows(), bw, bw);
        for r in 0..self.num_rows() {
            for (c, v) in self.row(r) {
                band.set(r, c, v);
            }
        }
        let t0 = std::time::Instant::now();
        let lu = band.factor()?;
        Ok(HelmholtzFactor { lu, factor_seconds: t0.elapsed().as_secs_f64() })
    }

    /// Debug dump in coordinate text format: `nx ny omega` header then
    /// `row col re im` lines at 17 significant digits.
    pub fn write_coo(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {} {:.16e}", self.grid.nx(), self.grid.ny(), self.omega)?;
        for r in 0..self.num_rows() {
            for (c, v) in self.row(r) {
                writeln!(out, "{} {} {:.16e} {:.16e}", r, c, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Immutable factorization handle; solve as many right-hand sides as
/// needed against it.
pub struct HelmholtzFactor {
    lu: BandLu,
    factor_seconds: f64,
}

impl HelmholtzFactor {
    pub fn factor_seconds(&self) -> f64 {
        self.factor_seconds
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio()
    }

    pub fn solve(&self, mut rhs: Vec<Complex64>) -> Vec<Complex64> {
        self.lu.solve_in_place(&mut rhs);
        rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn const_velocity(grid: Grid2D, v: f64) -> ScalarField2D {
        ScalarField2D::constant(grid, v).unwrap()
    }

    #[test]
    fn interior_row_is_textbook_five_point_stencil() {
        let grid = Grid2D::new(4, 4, 3.0, 3.0).unwrap();
        let v = const_velocity(grid, 2.0);
        let omega = 1.5;
        let sys = assemble(&v, omega, grid).unwrap();
        let (dx, dy) = (grid.dx(), grid.dy());
        let r = grid.idx(1, 2);
        let expect_diag = -2.0 / (dx * dx) - 2.0 / (dy * dy) + omega * omega / 4.0;
        assert!((sys.entry(r, r) - Complex64::new(expect_diag, 0.0)).norm() < 1e-14);
        assert!((sys.entry(r, grid.idx(0, 2)) - Complex64::new(1.0 / (dx * dx), 0.0)).norm() < 1e-14);
        assert!((sys.entry(r, grid.idx(2, 2)) - Complex64::new(1.0 / (dx * dx), 0.0)).norm() < 1e-14);
        assert!((sys.entry(r, grid.idx(1, 1)) - Complex64::new(1.0 / (dy * dy), 0.0)).norm() < 1e-14);
        assert!((sys.entry(r, grid.idx(1, 3)) - Complex64::new(1.0 / (dy * dy), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn matrix_is_complex_symmetric() {
        let grid = Grid2D::new(16, 16, 1000.0, 1000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = ScalarField2D::from_values(
            grid,
            (0..256).map(|_| rng.gen_range(1500.0..4500.0)).collect(),
        )
        .unwrap();
        let sys = assemble(&v, 2.0 * std::f64::consts::PI * 9.0, grid).unwrap();
        assert_eq!(sys.max_asymmetry(), 0.0);
    }

    #[test]
    fn abc_rows_have_damped_diagonal() {
        let grid = Grid2D::new(8, 8, 100.0, 100.0).unwrap();
        let v = const_velocity(grid, 1500.0);
        let sys = assemble(&v, 60.0, grid).unwrap();
        for r in 0..sys.num_rows() {
            match sys.tags()[r] {
                BoundaryTag::AbcLeft
                | BoundaryTag::AbcRight
                | BoundaryTag::AbcBottom
                | BoundaryTag::CornerAbc => {
                    assert!(sys.entry(r, r).im != 0.0, "row {r} should be damped");
                }
                BoundaryTag::FreeTop => {
                    assert_eq!(sys.entry(r, r), Complex64::new(1.0, 0.0));
                }
                BoundaryTag::Interior => assert_eq!(sys.entry(r, r).im, 0.0),
            }
        }
    }

    #[test]
    fn all_dirichlet_zero_omega_is_negative_definite_laplacian() {
        let grid = Grid2D::new(10, 10, 1.0, 1.0).unwrap();
        let v = const_velocity(grid, 1.0);
        let opts = AssembleOptions {
            layout: BoundaryLayout::AllDirichlet,
            ..AssembleOptions::default()
        };
        let sys = assemble_with(&v, 0.0, grid, &opts).unwrap();
        assert_eq!(sys.max_asymmetry(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            // Random vector supported on interior nodes only.
            let x: Vec<Complex64> = (0..sys.num_rows())
                .map(|r| {
                    if sys.row_weights()[r] == 0.0 {
                        Complex64::default()
                    } else {
                        Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                    }
                })
                .collect();
            let ax = sys.apply(&x);
            let quad: f64 = x.iter().zip(&ax).map(|(a, b)| (a.conj() * b).re).sum();
            assert!(quad < 0.0, "interior quadratic form should be negative, got {quad}");
        }
    }

    #[test]
    fn under_resolution_warns_or_errors() {
        let grid = Grid2D::new(8, 8, 1000.0, 1000.0).unwrap();
        let v = const_velocity(grid, 1500.0);
        let omega = 2.0 * std::f64::consts::PI * 40.0;
        let sys = assemble(&v, omega, grid).unwrap();
        assert!(!sys.warnings().is_empty());
        let opts = AssembleOptions { under_resolution_is_error: true, ..Default::default() };
        assert!(matches!(
            assemble_with(&v, omega, grid, &opts),
            Err(HelmholtzError::UnderResolved { .. })
        ));
    }

    #[test]
    fn nonpositive_velocity_rejected() {
        let grid = Grid2D::new(4, 4, 1.0, 1.0).unwrap();
        let mut vals = vec![1500.0; 16];
        vals[5] = 0.0;
        // ScalarField2D accepts zeros; assemble must not.
        let v = ScalarField2D::from_values(grid, vals).unwrap();
        assert!(matches!(
            assemble(&v, 1.0, grid),
            Err(HelmholtzError::NonPositiveVelocity { .. })
        ));
    }

    #[test]
    fn coo_dump_has_header_and_entries() {
        let grid = Grid2D::new(4, 4, 1.0, 1.0).unwrap();
        let sys = assemble(&const_velocity(grid, 1.0), 0.5, grid).unwrap();
        let mut buf = Vec::new();
        sys.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("4 4 5.0000000000000000e-1"));
        assert_eq!(text.lines().count(), 1 + sys.entry_count());
    }
}
