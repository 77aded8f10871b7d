use num_complex::Complex64;
use scatter_fields::{ComplexField2D, FieldError, Grid2D};

use crate::error::HelmholtzError;

/// Isotropic Gaussian source bump, purely real, normalized so the
/// discrete integral `sum(s) dx dy` equals `amplitude` exactly.
pub fn gaussian_point_source(
    grid: Grid2D,
    center: (f64, f64),
    width: f64,
    amplitude: f64,
) -> Result<ComplexField2D, HelmholtzError> {
    let (cx, cy) = center;
    if !(width > 0.0) {
        return Err(FieldError::Domain(format!("source width must be positive, got {width}")).into());
    }
    if cx < 0.0 || cx > grid.lx() || cy < 0.0 || cy > grid.ly() {
        return Err(FieldError::Domain(format!(
            "source center ({cx}, {cy}) outside domain [0,{}]x[0,{}]",
            grid.lx(),
            grid.ly()
        ))
        .into());
    }
    let inv_two_w2 = 1.0 / (2.0 * width * width);
    let mut raw = Vec::with_capacity(grid.num_nodes());
    let mut total = 0.0;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let dx = grid.x(i) - cx;
            let dy = grid.y(j) - cy;
            let g = (-(dx * dx + dy * dy) * inv_two_w2).exp();
            total += g;
            raw.push(g);
        }
    }
    let cell = grid.dx() * grid.dy();
    if total * cell == 0.0 {
        return Err(HelmholtzError::DegenerateSource);
    }
    let scale = amplitude / (total * cell);
    let vals = raw.into_iter().map(|g| Complex64::new(g * scale, 0.0)).collect();
    Ok(ComplexField2D::from_values(grid, vals)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_is_nearest_node_to_center() {
        let grid = Grid2D::new(16, 16, 1.0, 1.0).unwrap();
        let s = gaussian_point_source(grid, (0.52, 0.33), 0.08, 1.0).unwrap();
        let (mut best, mut arg) = (0.0, 0);
        for (k, v) in s.values().iter().enumerate() {
            if v.norm() > best {
                best = v.norm();
                arg = k;
            }
        }
        let (i, j) = grid.node(arg);
        // 0.52/dx = 7.8 -> node 8; 0.33/dy = 4.95 -> node 5.
        assert_eq!((i, j), (8, 5));
    }

    #[test]
    fn discrete_integral_equals_amplitude() {
        let grid = Grid2D::new(32, 32, 2.0, 2.0).unwrap();
        let s = gaussian_point_source(grid, (1.0, 1.0), 0.1, 3.5).unwrap();
        let cell = grid.dx() * grid.dy();
        let integral: f64 = s.values().iter().map(|v| v.re).sum::<f64>() * cell;
        assert!((integral - 3.5).abs() < 1e-6 * 3.5);
        assert!(s.values().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn narrow_source_mass_concentrates() {
        // 17 nodes put a node exactly at the domain center.
        let grid = Grid2D::new(17, 17, 1.0, 1.0).unwrap();
        let width = 0.5 * grid.dx();
        let s = gaussian_point_source(grid, (0.5, 0.5), width, 1.0).unwrap();
        let total: f64 = s.values().iter().map(|v| v.norm()).sum();
        // 3x3 neighborhood of the center node.
        let (ci, cj) = (8usize, 8usize);
        let mut near = 0.0;
        for j in cj - 1..=cj + 1 {
            for i in ci - 1..=ci + 1 {
                near += s.at(i, j).norm();
            }
        }
        assert!(near / total >= 0.9, "got {}", near / total);
    }
}
