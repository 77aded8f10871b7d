use num_complex::Complex64;
use scatter_fields::{ComplexField2D, ScalarField2D};

use crate::error::HelmholtzError;
use crate::system::{assemble, BoundaryTag, HelmholtzFactor, HelmholtzSystem};

/// Largest grid edge accepted by the Lippmann-Schwinger check (it needs
/// one Green's column per contrast node).
pub const LS_MAX_EDGE: usize = 32;

/// One column of the discrete background Green's function: the response
/// to a unit point source at `source_node` (cell-area normalized
/// discrete delta).
pub fn greens_column(
    v_bg: &ScalarField2D,
    omega: f64,
    source_node: usize,
) -> Result<ComplexField2D, HelmholtzError> {
    let system = assemble(v_bg, omega, v_bg.grid())?;
    let factor = system.factor()?;
    greens_column_with(&system, &factor, source_node)
}

/// Same as [`greens_column`] against a prebuilt factorization.
pub fn greens_column_with(
    system: &HelmholtzSystem,
    factor: &HelmholtzFactor,
    source_node: usize,
) -> Result<ComplexField2D, HelmholtzError> {
    if system.tags()[source_node] != BoundaryTag::Interior {
        return Err(HelmholtzError::NotInteriorNode(source_node));
    }
    let grid = system.grid();
    let cell = grid.dx() * grid.dy();
    let mut delta = ComplexField2D::zeros(grid);
    delta.values_mut()[source_node] = Complex64::new(1.0 / cell, 0.0);
    let b = system.rhs_from_source(&delta);
    let g = factor.solve(b);
    Ok(ComplexField2D::from_values(grid, g)?)
}

/// Discrete Lippmann-Schwinger defect of a solved field pair:
/// `r(x) = p(x) - p_s(x) - omega^2 sum_y G_s(x,y) dm(y) p(y) dx dy`
/// evaluated over `subgrid`, returned as `||r|| / ||p||` on that set.
///
/// Requires every contrast-support node to be interior (the generator's
/// boundary margin guarantees this) and a small grid, since one Green's
/// column is solved per support node.
pub fn lippmann_schwinger_residual(
    p: &ComplexField2D,
    p_s: &ComplexField2D,
    v_bg: &ScalarField2D,
    delta_m: &ScalarField2D,
    omega: f64,
    subgrid: &[usize],
) -> Result<f64, HelmholtzError> {
    let grid = v_bg.grid();
    if grid.nx() > LS_MAX_EDGE || grid.ny() > LS_MAX_EDGE {
        return Err(HelmholtzError::GridTooLarge { nx: grid.nx(), ny: grid.ny(), max: LS_MAX_EDGE });
    }
    let system = assemble(v_bg, omega, grid)?;
    let factor = system.factor()?;
    let cell = grid.dx() * grid.dy();
    let w2 = omega * omega;

    let support: Vec<usize> = delta_m
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &dm)| dm != 0.0)
        .map(|(k, _)| k)
        .collect();

    // Accumulate omega^2 * G dm p over the support.
    let mut scattered = vec![Complex64::default(); grid.num_nodes()];
    for &y in &support {
        let g = greens_column_with(&system, &factor, y)?;
        let weight = Complex64::new(w2 * delta_m.values()[y] * cell, 0.0) * p.values()[y];
        for (acc, gv) in scattered.iter_mut().zip(g.values()) {
            *acc += gv * weight;
        }
    }

    let mut defect = 0.0f64;
    let mut p_norm = 0.0f64;
    for &x in subgrid {
        let r = p.values()[x] - p_s.values()[x] - scattered[x];
        defect += r.norm_sqr();
        p_norm += p.values()[x].norm_sqr();
    }
    if p_norm == 0.0 {
        return Err(HelmholtzError::DegenerateSource);
    }
    Ok((defect / p_norm).sqrt())
}

/// First-order Born approximation `p_s + omega^2 G dm p_s` and its
/// relative error against the exact field; the error shrinks as
/// `O(dm^2)` when the contrast is scaled down.
pub fn born_relative_error(
    p_exact: &ComplexField2D,
    p_s: &ComplexField2D,
    v_bg: &ScalarField2D,
    delta_m: &ScalarField2D,
    omega: f64,
) -> Result<f64, HelmholtzError> {
    let grid = v_bg.grid();
    if grid.nx() > LS_MAX_EDGE || grid.ny() > LS_MAX_EDGE {
        return Err(HelmholtzError::GridTooLarge { nx: grid.nx(), ny: grid.ny(), max: LS_MAX_EDGE });
    }
    let system = assemble(v_bg, omega, grid)?;
    let factor = system.factor()?;
    let cell = grid.dx() * grid.dy();
    let w2 = omega * omega;

    let mut born = p_s.values().to_vec();
    for (y, &dm) in delta_m.values().iter().enumerate() {
        if dm == 0.0 {
            continue;
        }
        let g = greens_column_with(&system, &factor, y)?;
        let weight = Complex64::new(w2 * dm * cell, 0.0) * p_s.values()[y];
        for (acc, gv) in born.iter_mut().zip(g.values()) {
            *acc += gv * weight;
        }
    }
    let num: f64 =
        born.iter().zip(p_exact.values()).map(|(b, p)| (b - p).norm_sqr()).sum::<f64>().sqrt();
    let den = p_exact.norm_l2();
    if den == 0.0 {
        return Err(HelmholtzError::DegenerateSource);
    }
    Ok(num / den)
}
