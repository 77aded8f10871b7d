//! Modified Bessel function of the second kind `K_nu` for real order
//! `nu >= 0`, by Temme's series for small arguments and a continued
//! fraction for large ones, with upward recurrence in the order. This is
//! the independent special-function backend for the Matern kernel; it is
//! validated against the half-integer closed forms.

use statrs::function::gamma::gamma;

const EPS: f64 = f64::EPSILON;
const MAX_ITER: usize = 10_000;

/// Coefficients of `1/Gamma(1+x) = sum a_k x^k` (first terms), used to
/// evaluate the Temme auxiliaries without cancellation near mu = 0.
const A1: f64 = 0.577_215_664_901_532_9; // Euler-Mascheroni
const A3: f64 = -0.042_002_635_034_095_24;
const A5: f64 = -0.042_197_734_555_544_34;

/// `gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu)` and
/// `gam2 = [1/Gamma(1-mu) + 1/Gamma(1+mu)] / 2`, plus the reciprocals
/// themselves. `|mu| <= 1/2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / gamma(1.0 + mu);
    let gammi = 1.0 / gamma(1.0 - mu);
    let gam1 = if mu.abs() < 1e-3 {
        // Odd-coefficient series of 1/Gamma(1+x); error O(mu^6).
        -(A1 + A3 * mu * mu + A5 * mu.powi(4))
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    let gam2 = (gammi + gampl) / 2.0;
    (gam1, gam2, gampl, gammi)
}

/// `K_nu(x)` for `nu >= 0`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && nu.is_finite(), "order must be finite and nonnegative");
    assert!(x > 0.0, "argument must be positive");

    // Split nu = n + mu with |mu| <= 1/2.
    let n = (nu + 0.5).floor() as usize;
    let mu = nu - n as f64;

    let (mut k_mu, mut k_mu1) = if x <= 2.0 { temme_small(mu, x) } else { cf2_large(mu, x) };

    // Upward recurrence K_{m+1} = K_{m-1} + 2 m / x K_m (stable for K);
    // after the loop `k_mu` holds K_{mu+n} = K_nu.
    let mut m = mu;
    for _ in 0..n {
        let next = k_mu + 2.0 * (m + 1.0) / x * k_mu1;
        k_mu = k_mu1;
        k_mu1 = next;
        m += 1.0;
    }
    let _ = k_mu1;
    k_mu
}

/// Temme series for `K_mu`, `K_{mu+1}` with `x <= 2`, `|mu| <= 1/2`.
fn temme_small(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = std::f64::consts::PI * mu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / gampl;
    let mut q = 0.5 / (e * gammi);
    let mut c = 1.0;
    let d2 = x2 * x2;
    let mut sum1 = p;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d2 / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// Steed/Thompson-Barnett continued fraction CF2 for `x > 2`.
fn cf2_large(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = delh;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        a -= 2.0 * (i as f64 - 1.0);
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}
