use num_complex::Complex64;

use crate::error::HelmholtzError;

/// Complex banded matrix in LAPACK-style band storage with room for
/// partial-pivoting fill.
///
/// A matrix with lower bandwidth `kl` and upper bandwidth `ku` is stored
/// column-major with leading dimension `2*kl + ku + 1`; entry `(i, j)`
/// lives at row offset `kl + ku + i - j` of column `j`. The top `kl` rows
/// of each column are fill space used when row swaps widen the upper
/// band.
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, ab: vec![Complex64::default(); ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "entry outside band");
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.offset(i, j);
        self.ab[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.offset(i, j);
        self.ab[k] += v;
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    ///
    /// Fails when a pivot is exactly zero or when the pivot-magnitude
    /// ratio indicates the system is numerically singular.
    pub fn factor(mut self) -> Result<BandLu, HelmholtzError> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // upper bandwidth of U after pivoting
        let mut ipiv = vec![0usize; n];
        let mut min_piv = f64::INFINITY;
        let mut max_piv = 0.0f64;

        for j in 0..n {
            let km = kl.min(n - 1 - j); // active subdiagonal rows
            // Pivot search in column j, rows j..=j+km.
            let col = j * ldab;
            let mut p = 0usize;
            let mut best = self.ab[col + kv].norm_sqr();
            for t in 1..=km {
                let mag = self.ab[col + kv + t].norm_sqr();
                if mag > best {
                    best = mag;
                    p = t;
                }
            }
            ipiv[j] = j + p;
            let piv_mag = best.sqrt();
            if piv_mag == 0.0 {
                return Err(HelmholtzError::SingularMatrix { column: j, pivot_ratio: 0.0 });
            }
            min_piv = min_piv.min(piv_mag);
            max_piv = max_piv.max(piv_mag);

            let jmax = (j + kv).min(n - 1); // rightmost column touching row j
            if p != 0 {
                // Swap rows j and j+p across columns j..=jmax.
                for c in j..=jmax {
                    let base = c * ldab + kv + j - c;
                    self.ab.swap(base, base + p);
                }
            }
            let pivot = self.ab[col + kv];
            let inv = Complex64::new(1.0, 0.0) / pivot;
            for t in 1..=km {
                self.ab[col + kv + t] *= inv;
            }
            // Rank-1 trailing update restricted to the band.
            for c in (j + 1)..=jmax {
                let ucol = c * ldab + kv + j - c;
                let u = self.ab[ucol];
                if u.re == 0.0 && u.im == 0.0 {
                    continue;
                }
                for t in 1..=km {
                    let m = self.ab[col + kv + t];
                    self.ab[ucol + t] -= m * u;
                }
            }
        }

        let pivot_ratio = if max_piv > 0.0 { min_piv / max_piv } else { 0.0 };
        if pivot_ratio < 1e-14 {
            return Err(HelmholtzError::SingularMatrix { column: n, pivot_ratio });
        }
        Ok(BandLu { n, kl, kv, ldab, ab: self.ab, ipiv, pivot_ratio })
    }
}

/// Factored form of a [`BandMatrix`]; immutable, reusable for many
/// right-hand sides.
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
    pivot_ratio: f64,
}

impl BandLu {
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kv, self.ldab);
        // L: unit lower triangular, multipliers stored below the diagonal.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj.re == 0.0 && bj.im == 0.0 {
                continue;
            }
            let col = j * ldab + kv;
            for t in 1..=km {
                b[j + t] -= self.ab[col + t] * bj;
            }
        }
        // U: upper triangular with bandwidth kv.
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            let xj = b[j] / self.ab[col];
            b[j] = xj;
            if xj.re == 0.0 && xj.im == 0.0 {
                continue;
            }
            let imin = j.saturating_sub(kv);
            for i in imin..j {
                b[i] -= self.ab[j * ldab + kv + i - j] * xj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(
        n: usize,
        kl: usize,
        ku: usize,
        rng: &mut ChaCha8Rng,
    ) -> (BandMatrix, Vec<Vec<Complex64>>) {
        let mut m = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![Complex64::default(); n]; n];
        for j in 0..n {
            for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                // Boost the diagonal a little so random instances are
                // comfortably nonsingular.
                let v = if i == j { v + Complex64::new(3.0, 0.5) } else { v };
                m.set(i, j, v);
                dense[i][j] = v;
            }
        }
        (m, dense)
    }

    fn matvec(dense: &[Vec<Complex64>], x: &[Complex64]) -> Vec<Complex64> {
        dense
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn factor_solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (7, 2, 1), (40, 5, 5), (90, 12, 3)] {
            let (m, dense) = random_banded(n, kl, ku, &mut rng);
            let x_true: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut b = matvec(&dense, &x_true);
            let lu = m.factor().unwrap();
            lu.solve_in_place(&mut b);
            let err = b
                .iter()
                .zip(&x_true)
                .map(|(a, c)| (a - c).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "n={n} kl={kl} ku={ku}: err={err}");
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        // First diagonal entry zero forces an immediate row swap.
        let mut m = BandMatrix::zeros(3, 1, 1);
        let e = |re: f64, im: f64| Complex64::new(re, im);
        m.set(0, 0, e(0.0, 0.0));
        m.set(1, 0, e(2.0, 0.0));
        m.set(0, 1, e(1.0, 0.0));
        m.set(1, 1, e(1.0, 1.0));
        m.set(2, 1, e(-1.0, 0.0));
        m.set(1, 2, e(0.5, 0.0));
        m.set(2, 2, e(3.0, -1.0));
        let lu = m.factor().unwrap();
        // b = A * [1, 1, 1]
        let mut b = vec![e(1.0, 0.0), e(3.5, 1.0), e(2.0, -1.0)];
        lu.solve_in_place(&mut b);
        for v in &b {
            assert!((v - e(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = BandMatrix::zeros(2, 1, 1);
        m.set(0, 0, Complex64::new(1.0, 0.0));
        m.set(0, 1, Complex64::new(2.0, 0.0));
        m.set(1, 0, Complex64::new(2.0, 0.0));
        m.set(1, 1, Complex64::new(4.0, 0.0));
        match m.factor() {
            Err(HelmholtzError::SingularMatrix { .. }) => {}
            other => panic!("expected singular error, got {:?}", other.map(|_| ())),
        }
    }
}
