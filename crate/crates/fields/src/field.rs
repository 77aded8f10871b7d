use num_complex::Complex64;

use crate::grid::{FieldError, Grid2D};

/// Real-valued samples on a [`Grid2D`], row-major (y-outer).
///
/// Holds velocities (m/s), binary masks, salt fractions, and slowness
/// contrasts; the unit is the caller's business.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.num_nodes()] }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Result<Self, FieldError> {
        Self::from_values(grid, vec![value; grid.num_nodes()])
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.num_nodes() {
            return Err(FieldError::LengthMismatch { got: values.len(), want: grid.num_nodes() });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(bad));
        }
        Ok(Self { grid, values })
    }

    /// Builds from a closure of physical coordinates `(x, y)`.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(grid.num_nodes());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// True when every value lies in `[0, 1]`.
    pub fn is_fraction(&self) -> bool {
        self.values.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, FieldError> {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Complex-valued samples on a [`Grid2D`]; pressures and sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.num_nodes()] }
    }

    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.num_nodes() {
            return Err(FieldError::LengthMismatch { got: values.len(), want: grid.num_nodes() });
        }
        if let Some(bad) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(FieldError::NonFinite(bad));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(field: &ScalarField2D) -> Self {
        Self {
            grid: field.grid(),
            values: field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Flat Euclidean norm over all (re, im) components.
    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn re_field(&self) -> ScalarField2D {
        ScalarField2D::from_values(self.grid, self.values.iter().map(|v| v.re).collect())
            .expect("finite by construction")
    }

    pub fn im_field(&self) -> ScalarField2D {
        ScalarField2D::from_values(self.grid, self.values.iter().map(|v| v.im).collect())
            .expect("finite by construction")
    }
}

/// Temporal frequency with its angular counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    hz: f64,
}

impl Frequency {
    pub fn from_hz(hz: f64) -> Result<Self, FieldError> {
        if !(hz > 0.0) || !hz.is_finite() {
            return Err(FieldError::Domain(format!("frequency must be positive, got {hz}")));
        }
        Ok(Self { hz })
    }

    pub fn hz(&self) -> f64 {
        self.hz
    }

    /// Angular frequency `omega = 2 pi f` in rad/s.
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hz
    }
}

/// Relative L2 error `||pred - target|| / ||target||` over the flattened
/// (re, im) components. This is both the training loss and the headline
/// evaluation metric.
pub fn field_rel_l2(pred: &ComplexField2D, target: &ComplexField2D) -> Result<f64, FieldError> {
    if pred.grid() != target.grid() {
        return Err(FieldError::GridMismatch(
            pred.grid().nx(),
            pred.grid().ny(),
            target.grid().nx(),
            target.grid().ny(),
        ));
    }
    let denom = target.norm_l2();
    if denom == 0.0 {
        return Err(FieldError::DegenerateTarget);
    }
    let num = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| (p - t).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}
