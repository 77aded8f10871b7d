//! Finite-difference frequency-domain Helmholtz solver.
//!
//! Discretizes `(lap + omega^2 / v^2) p = -s` on a uniform grid with a
//! second-order 5-point stencil, a free surface (`p = 0`) along the top
//! edge, and first-order absorbing Robin conditions
//! `d_nu p - (i omega / v) p = 0` on the other three edges, eliminated
//! through ghost nodes at second order. Boundary rows are scaled so the
//! assembled matrix is complex symmetric; systems are solved by a banded
//! complex LU with partial pivoting (restarted GMRES with a
//! complex-shifted preconditioner is available as the alternate route).
//!
//! Besides the forward solves, the crate carries the verification
//! machinery used as ground truth for the learned surrogates: discrete
//! Green's columns, the Lippmann-Schwinger identity, Born scaling, and
//! PDE residual evaluation.

mod band;
mod error;
mod greens;
mod krylov;
pub mod mms;
mod solve;
mod source;
mod system;

pub use error::HelmholtzError;
pub use greens::{
    born_relative_error, greens_column, greens_column_with, lippmann_schwinger_residual,
    LS_MAX_EDGE,
};
pub use krylov::{solve_full_gmres, GmresOptions};
pub use solve::{
    pde_residual, residual_source, slowness_contrast, solve_background, solve_full,
    solve_residual, solve_with_factor, velocity_from_contrast, SolveReport,
};
pub use source::gaussian_point_source;
pub use system::{
    assemble, assemble_with, AssembleOptions, BoundaryLayout, BoundaryTag, HelmholtzFactor,
    HelmholtzSystem, RobinData,
};
