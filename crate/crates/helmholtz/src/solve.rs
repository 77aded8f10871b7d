use num_complex::Complex64;
use scatter_fields::{ComplexField2D, ScalarField2D};

use crate::error::HelmholtzError;
use crate::system::{assemble, HelmholtzFactor, HelmholtzSystem};

/// Diagnostics for one linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Relative discrete residual `||A p + s_vec|| / ||s_vec||`.
    pub residual_norm: f64,
    /// Krylov iterations; 0 for the direct path.
    pub iterations: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves an already-assembled system against a source field, reusing a
/// factorization. This is the shared backend of the `solve_*` wrappers;
/// dataset generation calls it directly to amortize factorizations.
pub fn solve_with_factor(
    system: &HelmholtzSystem,
    factor: &HelmholtzFactor,
    source: &ComplexField2D,
) -> (ComplexField2D, SolveReport) {
    let b = system.rhs_from_source(source);
    let b_norm = vec_norm(&b);
    let t0 = std::time::Instant::now();
    let x = if b_norm == 0.0 { vec![Complex64::default(); b.len()] } else { factor.solve(b.clone()) };
    let solve_seconds = t0.elapsed().as_secs_f64();
    let residual_norm = if b_norm == 0.0 {
        0.0
    } else {
        let ax = system.apply(&x);
        let r: f64 = ax.iter().zip(&b).map(|(a, bb)| (a - bb).norm_sqr()).sum::<f64>();
        r.sqrt() / b_norm
    };
    let p = ComplexField2D::from_values(system.grid(), x).expect("solver output finite");
    (
        p,
        SolveReport {
            residual_norm,
            iterations: 0,
            factor_seconds: factor.factor_seconds(),
            solve_seconds,
        },
    )
}

/// Forward map: solves `(lap + omega^2/v^2) p = -s` with the mixed
/// free-surface/absorbing boundary layout.
pub fn solve_full(
    velocity: &ScalarField2D,
    source: &ComplexField2D,
    omega: f64,
) -> Result<(ComplexField2D, SolveReport), HelmholtzError> {
    let system = assemble(velocity, omega, velocity.grid())?;
    let factor = system.factor()?;
    Ok(solve_with_factor(&system, &factor, source))
}

/// Background map: identical code path with the smoothed wavespeed.
pub fn solve_background(
    v_bg: &ScalarField2D,
    source: &ComplexField2D,
    omega: f64,
) -> Result<(ComplexField2D, SolveReport), HelmholtzError> {
    solve_full(v_bg, source, omega)
}

/// Slowness contrast `v^-2 - v_bg^-2`.
pub fn slowness_contrast(
    velocity: &ScalarField2D,
    v_bg: &ScalarField2D,
) -> Result<ScalarField2D, HelmholtzError> {
    if velocity.grid() != v_bg.grid() {
        return Err(scatter_fields::FieldError::GridMismatch(
            velocity.grid().nx(),
            velocity.grid().ny(),
            v_bg.grid().nx(),
            v_bg.grid().ny(),
        )
        .into());
    }
    let vals = velocity
        .values()
        .iter()
        .zip(v_bg.values())
        .map(|(&v, &vb)| 1.0 / (v * v) - 1.0 / (vb * vb))
        .collect();
    Ok(ScalarField2D::from_values(velocity.grid(), vals)?)
}

/// Effective contrast source `omega^2 * dm * p_bg` feeding the residual
/// problem.
pub fn residual_source(
    delta_m: &ScalarField2D,
    p_bg: &ComplexField2D,
    omega: f64,
) -> ComplexField2D {
    let w2 = omega * omega;
    let vals = delta_m
        .values()
        .iter()
        .zip(p_bg.values())
        .map(|(&dm, &p)| p * (w2 * dm))
        .collect();
    ComplexField2D::from_values(delta_m.grid(), vals).expect("finite")
}

/// Residual solve: the rearranged contrast equation
/// `(lap + omega^2/v^2) dp = -omega^2 dm p_bg` with the full-velocity
/// operator (Robin rows use `v(x)` exactly as the residual problem
/// states them).
pub fn solve_residual(
    v_bg: &ScalarField2D,
    velocity_full: &ScalarField2D,
    p_bg: &ComplexField2D,
    omega: f64,
) -> Result<(ComplexField2D, SolveReport), HelmholtzError> {
    let dm = slowness_contrast(velocity_full, v_bg)?;
    let system = assemble(velocity_full, omega, velocity_full.grid())?;
    let factor = system.factor()?;
    let s_eff = residual_source(&dm, p_bg, omega);
    Ok(solve_with_factor(&system, &factor, &s_eff))
}

/// Discrete PDE residual `||A(v, omega) p + s_vec|| / ||s_vec||` of a
/// candidate field against the assembled operator.
pub fn pde_residual(
    p: &ComplexField2D,
    velocity: &ScalarField2D,
    source: &ComplexField2D,
    omega: f64,
) -> Result<f64, HelmholtzError> {
    let system = assemble(velocity, omega, velocity.grid())?;
    let b = system.rhs_from_source(source);
    let b_norm = vec_norm(&b);
    if b_norm == 0.0 {
        return Err(HelmholtzError::DegenerateSource);
    }
    let ax = system.apply(p.values());
    let r = ax.iter().zip(&b).map(|(a, bb)| (a - bb).norm_sqr()).sum::<f64>().sqrt();
    Ok(r / b_norm)
}

/// Velocity with slowness squared `v_bg^-2 + dm`; inverse of
/// [`slowness_contrast`] for Born-scaling experiments.
pub fn velocity_from_contrast(
    v_bg: &ScalarField2D,
    delta_m: &ScalarField2D,
) -> Result<ScalarField2D, HelmholtzError> {
    let vals: Vec<f64> = v_bg
        .values()
        .iter()
        .zip(delta_m.values())
        .map(|(&vb, &dm)| {
            let s2 = 1.0 / (vb * vb) + dm;
            if s2 > 0.0 { Ok(1.0 / s2.sqrt()) } else { Err(()) }
        })
        .collect::<Result<_, _>>()
        .map_err(|_| HelmholtzError::NonPositiveVelocity { min: f64::NEG_INFINITY })?;
    Ok(ScalarField2D::from_values(v_bg.grid(), vals)?)
}
