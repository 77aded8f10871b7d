use thiserror::Error;

/// Errors raised by field containers and field-level operations.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: nx={nx}, ny={ny}, lx={lx}, ly={ly} ({reason})")]
    InvalidGrid {
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        reason: &'static str,
    },
    #[error("grid mismatch: ({0}x{1}) vs ({2}x{3})")]
    GridMismatch(usize, usize, usize, usize),
    #[error("field values must be finite (found NaN or Inf at flat index {0})")]
    NonFinite(usize),
    #[error("value buffer has length {got}, grid needs {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("degenerate target: zero norm")]
    DegenerateTarget,
    #[error("degenerate field: all values equal")]
    DegenerateField,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Uniform rectangular grid with `nx * ny` nodes on `[0, lx] x [0, ly]`.
///
/// Node coordinates follow `x_i = i/(nx-1) * lx`, `y_j = j/(ny-1) * ly`,
/// so edge nodes sit exactly on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid2D {
    /// Build a grid. Requires at least 2 nodes per axis (the spacing
    /// `lx/(nx-1)` must exist); the Helmholtz stencil separately requires
    /// 4 or more at assembly time.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, FieldError> {
        let fail = |reason| FieldError::InvalidGrid { nx, ny, lx, ly, reason };
        if nx < 2 || ny < 2 {
            return Err(fail("need nx >= 2 and ny >= 2"));
        }
        if !(lx > 0.0) || !(ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(fail("extents must be positive and finite"));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Physical x coordinate of column `i`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Physical y coordinate of row `j`.
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    /// Flat index of node `(i, j)` in row-major (y-outer) order.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Inverse of [`idx`](Self::idx): `(i, j)` of a flat index.
    pub fn node(&self, flat: usize) -> (usize, usize) {
        (flat % self.nx, flat / self.nx)
    }
}
