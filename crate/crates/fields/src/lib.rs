//! Grid geometry, field containers, and spectral helpers shared by the
//! velocity-model generator, the Helmholtz solver, and the neural layers.
//!
//! Storage is row-major with the y index outermost: `values[j * nx + i]`
//! holds the node at `(x_i, y_j) = (i * dx, j * dy)`. The same (y, x)
//! layout is used everywhere so image-grid and solver-grid code never
//! transpose.

mod field;
mod grid;
mod resample;
mod spectral;

pub use field::{field_rel_l2, ComplexField2D, Frequency, ScalarField2D};
pub use grid::{FieldError, Grid2D};
pub use resample::resample_nearest;
pub use spectral::{dft2_forward, dft2_inverse, fft2_unitary, fft3_unitary, Dft2Coeffs};

pub use num_complex::Complex64;
