use scatter_fields::{resample_nearest, Grid2D, ScalarField2D};

use crate::error::GeoError;

/// Sharp/smoothed wavespeed pair with its contrasts, all on the solver
/// grid. `delta_v = v - v_bg` and `delta_m = v^-2 - v_bg^-2` are stored
/// and recomputable from `v`, `v_bg`.
#[derive(Debug, Clone)]
pub struct VelocityPair {
    pub v: ScalarField2D,
    pub v_bg: ScalarField2D,
    pub delta_v: ScalarField2D,
    pub delta_m: ScalarField2D,
    pub alpha: ScalarField2D,
    pub mask: ScalarField2D,
}

impl VelocityPair {
    /// Checks the definitional identities and bounds; used by tests and
    /// by the dataset writer.
    pub fn validate(&self, v_background: f64, v_salt: f64, margin: usize) -> Result<(), GeoError> {
        let lo = v_background.min(v_salt);
        let hi = v_background.max(v_salt);
        let grid = self.v.grid();
        for k in 0..grid.num_nodes() {
            let (v, vb) = (self.v.values()[k], self.v_bg.values()[k]);
            if v < lo - 1e-9 || v > hi + 1e-9 || vb < lo - 1e-9 || vb > hi + 1e-9 {
                return Err(GeoError::InvalidParameter(format!(
                    "velocity out of [{lo}, {hi}] at node {k}: v={v}, v_bg={vb}"
                )));
            }
            if (self.delta_v.values()[k] - (v - vb)).abs() > 1e-12 * hi {
                return Err(GeoError::InvalidParameter(format!("delta_v mismatch at {k}")));
            }
            let dm = 1.0 / (v * v) - 1.0 / (vb * vb);
            if (self.delta_m.values()[k] - dm).abs() > 1e-12 {
                return Err(GeoError::InvalidParameter(format!("delta_m mismatch at {k}")));
            }
        }
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let edge = i < margin || j < margin || i + margin >= grid.nx() || j + margin >= grid.ny();
                if edge && self.delta_v.at(i, j) != 0.0 {
                    return Err(GeoError::InvalidParameter(format!(
                        "delta_v nonzero inside the boundary margin at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds the velocity pair from an image-grid mask and fraction field:
/// nearest-neighbor resampling to the solver grid, the two convex
/// combinations `v = v_salt chi + v_bg (1 - chi)` and
/// `v_s = v_salt alpha + v_bg (1 - alpha)`, the contrasts, and the
/// forced-background margin (where both chi and alpha are zeroed so
/// `delta_v = delta_m = 0`).
pub fn build_velocity_pair(
    mask: &ScalarField2D,
    alpha: &ScalarField2D,
    v_background: f64,
    v_salt: f64,
    solver_grid: Grid2D,
    boundary_margin: usize,
) -> Result<VelocityPair, GeoError> {
    if !(v_background > 0.0) || !(v_salt > 0.0) {
        return Err(GeoError::InvalidParameter(format!(
            "velocities must be positive: v_background={v_background}, v_salt={v_salt}"
        )));
    }
    if !mask.is_binary() {
        return Err(GeoError::InvalidParameter("mask must be binary".into()));
    }
    if !alpha.is_fraction() {
        return Err(GeoError::InvalidParameter("alpha must lie in [0,1]".into()));
    }
    if mask.grid() != alpha.grid() {
        return Err(scatter_fields::FieldError::GridMismatch(
            mask.grid().nx(),
            mask.grid().ny(),
            alpha.grid().nx(),
            alpha.grid().ny(),
        )
        .into());
    }

    let mut chi = resample_nearest(mask, solver_grid);
    let mut alpha_s = resample_nearest(alpha, solver_grid);
    let (nx, ny) = (solver_grid.nx(), solver_grid.ny());
    let b = boundary_margin;
    if b > 0 {
        for j in 0..ny {
            for i in 0..nx {
                if i < b || j < b || i + b >= nx || j + b >= ny {
                    chi.set(i, j, 0.0);
                    alpha_s.set(i, j, 0.0);
                }
            }
        }
    }

    let mut v = Vec::with_capacity(solver_grid.num_nodes());
    let mut v_bg = Vec::with_capacity(solver_grid.num_nodes());
    let mut dv = Vec::with_capacity(solver_grid.num_nodes());
    let mut dm = Vec::with_capacity(solver_grid.num_nodes());
    for k in 0..solver_grid.num_nodes() {
        let c = chi.values()[k];
        let a = alpha_s.values()[k];
        let vv = v_salt * c + v_background * (1.0 - c);
        let vs = v_salt * a + v_background * (1.0 - a);
        v.push(vv);
        v_bg.push(vs);
        dv.push(vv - vs);
        dm.push(1.0 / (vv * vv) - 1.0 / (vs * vs));
    }
    Ok(VelocityPair {
        v: ScalarField2D::from_values(solver_grid, v)?,
        v_bg: ScalarField2D::from_values(solver_grid, v_bg)?,
        delta_v: ScalarField2D::from_values(solver_grid, dv)?,
        delta_m: ScalarField2D::from_values(solver_grid, dm)?,
        alpha: alpha_s,
        mask: chi,
    })
}
