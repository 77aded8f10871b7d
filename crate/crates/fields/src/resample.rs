use crate::field::ScalarField2D;
use crate::grid::Grid2D;

/// Nearest source index for physical coordinate `coord` on a source axis
/// with spacing `d` and `n` nodes. Exact half-way ties go to the lower
/// index so resampling is deterministic across platforms.
fn nearest_index(coord: f64, d: f64, n: usize) -> usize {
    let t = coord / d;
    let lo = t.floor();
    let frac = t - lo;
    let mut k = if frac > 0.5 { lo as isize + 1 } else { lo as isize };
    if k < 0 {
        k = 0;
    }
    if k as usize >= n {
        k = n as isize - 1;
    }
    k as usize
}

/// Resamples `src` onto `dst_grid` by nearest-neighbor lookup in physical
/// coordinates. Used to move image-grid masks and fractions onto the
/// solver grid.
pub fn resample_nearest(src: &ScalarField2D, dst_grid: Grid2D) -> ScalarField2D {
    let sg = src.grid();
    if sg == dst_grid {
        return src.clone();
    }
    let (sdx, sdy) = (sg.dx(), sg.dy());
    let mut out = ScalarField2D::zeros(dst_grid);
    for j in 0..dst_grid.ny() {
        let sj = nearest_index(dst_grid.y(j), sdy, sg.ny());
        for i in 0..dst_grid.nx() {
            let si = nearest_index(dst_grid.x(i), sdx, sg.nx());
            out.set(i, j, src.at(si, sj));
        }
    }
    out
}
