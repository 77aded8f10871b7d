use statrs::function::gamma::gamma;

use crate::bessel::bessel_k;
use crate::error::GeoError;

/// Matern kernel parameters: marginal variance, correlation length, and
/// smoothness. The length unit (cells or meters) follows the caller's
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    pub sigma2: f64,
    pub ell: f64,
    pub nu: f64,
}

impl MaternParams {
    pub fn new(sigma2: f64, ell: f64, nu: f64) -> Result<Self, GeoError> {
        if !(sigma2 > 0.0) || !(ell > 0.0) || !(nu > 0.0) {
            return Err(GeoError::InvalidParameter(format!(
                "Matern parameters must be positive: sigma2={sigma2}, ell={ell}, nu={nu}"
            )));
        }
        Ok(Self { sigma2, ell, nu })
    }
}

/// Matern covariance at lag `r >= 0`:
/// `sigma^2 2^(1-nu)/Gamma(nu) (r/l)^nu K_nu(r/l)`, with the `r -> 0`
/// limit `sigma^2` taken explicitly.
pub fn matern_cov(r: f64, params: &MaternParams) -> Result<f64, GeoError> {
    if r < 0.0 {
        return Err(GeoError::NegativeDistance(r));
    }
    let t = r / params.ell;
    // The kernel tends to sigma^2 as t -> 0; below ~1e-8 the direct
    // formula loses digits to the K_nu singularity, so return the limit.
    if t < 1e-10 {
        return Ok(params.sigma2);
    }
    let nu = params.nu;
    let coeff = 2.0f64.powf(1.0 - nu) / gamma(nu);
    Ok(params.sigma2 * coeff * t.powf(nu) * bessel_k(nu, t))
}

/// Isotropic Matern spectral density in `d` dimensions under the
/// convention `C(r) = (2 pi)^-d integral S(k) e^(i k r) dk`:
/// `S(k) = sigma^2 (4 pi)^(d/2) Gamma(nu + d/2)/Gamma(nu) kappa^(2 nu)
/// (kappa^2 + |k|^2)^-(nu + d/2)` with `kappa = 1/l`.
pub fn matern_spectral_density(k_norm2: f64, params: &MaternParams, dim: usize) -> f64 {
    let nu = params.nu;
    let d = dim as f64;
    let kappa2 = 1.0 / (params.ell * params.ell);
    let coeff = params.sigma2
        * (4.0 * std::f64::consts::PI).powf(d / 2.0)
        * gamma(nu + d / 2.0)
        / gamma(nu)
        * kappa2.powf(nu);
    coeff * (kappa2 + k_norm2).powf(-(nu + d / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lag_is_variance() {
        let p = MaternParams::new(2.3, 11.0, 1.6).unwrap();
        assert_eq!(matern_cov(0.0, &p).unwrap(), 2.3);
    }

    #[test]
    fn negative_lag_rejected() {
        let p = MaternParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(matern_cov(-0.1, &p), Err(GeoError::NegativeDistance(_))));
    }

    #[test]
    fn exponential_closed_form_at_nu_half() {
        let p = MaternParams::new(1.0, 7.0, 0.5).unwrap();
        for &r in &[0.0f64, 7.0, 14.0] {
            let want = (-r / 7.0).exp();
            let got = matern_cov(r, &p).unwrap();
            assert!((got - want).abs() < 1e-12, "r={r}: {got} vs {want}");
        }
    }

    #[test]
    fn nu_three_halves_closed_form() {
        let p = MaternParams::new(1.7, 5.0, 1.5).unwrap();
        for &r in &[0.5, 5.0, 12.0] {
            let t: f64 = r / 5.0;
            let want = 1.7 * (1.0 + t) * (-t).exp();
            let got = matern_cov(r, &p).unwrap();
            assert!((got - want).abs() < 1e-12 * 1.7, "r={r}");
        }
    }

    #[test]
    fn paper_smoothness_against_reference() {
        // Frozen from an independent arbitrary-precision evaluation of
        // the kernel at nu = 1.6, l = 40.
        let p = MaternParams::new(1.0, 40.0, 1.6).unwrap();
        let cases = [
            (20.0, 0.918937511330008158),
            (40.0, 0.754583686980430025),
            (80.0, 0.428290789859082943),
        ];
        for (r, want) in cases {
            let got = matern_cov(r, &p).unwrap();
            assert!((got - want).abs() < 1e-12, "r={r}: {got} vs {want}");
        }
    }

    #[test]
    fn spectral_density_integrates_to_variance_2d() {
        // (2 pi)^-2 integral S = sigma^2; radial quadrature oracle.
        let p = MaternParams::new(1.4, 3.0, 1.2).unwrap();
        let mut acc = 0.0;
        let dk = 1e-3;
        let mut k = 0.5 * dk;
        while k < 400.0 {
            acc += matern_spectral_density(k * k, &p, 2) * k * dk;
            k += dk;
        }
        let integral = acc * 2.0 * std::f64::consts::PI / (2.0 * std::f64::consts::PI).powi(2);
        assert!(
            (integral - 1.4).abs() < 1e-3,
            "spectral mass {integral} should match variance"
        );
    }
}
