use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::tensor::Tensor;

/// Result of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

/// Central-difference check of analytic gradients.
///
/// `loss` must evaluate the same scalar the analytic gradients were
/// computed for (typically the sum of outputs weighted by a fixed random
/// cotangent). Each sampled coordinate is perturbed by
/// `eps_scale * max(1, |theta|)`; at most `coords_per_tensor` random
/// coordinates per tensor are sampled (all of them when the tensor is
/// small). The relative error uses `max(|analytic|, |numeric|, 1e-6)` as
/// the denominator to keep dead coordinates from dividing by zero.
pub fn grad_check(
    params: &[Tensor],
    analytic: &[Tensor],
    loss: &mut dyn FnMut(&[Tensor]) -> f64,
    eps_scale: f64,
    coords_per_tensor: usize,
    seed: u64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut work: Vec<Tensor> = params.to_vec();
    let mut max_rel: f64 = 0.0;
    let mut checked = 0usize;
    for t in 0..params.len() {
        let n = params[t].len();
        let mut coords: Vec<usize> = (0..n).collect();
        if n > coords_per_tensor {
            coords.shuffle(&mut rng);
            coords.truncate(coords_per_tensor);
        }
        for &k in &coords {
            let theta = params[t].data()[k];
            let eps = eps_scale * theta.abs().max(1.0);
            work[t].data_mut()[k] = theta + eps;
            let up = loss(&work);
            work[t].data_mut()[k] = theta - eps;
            let down = loss(&work);
            work[t].data_mut()[k] = theta;
            let numeric = (up - down) / (2.0 * eps);
            let exact = analytic[t].data()[k];
            let denom = exact.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max((exact - numeric).abs() / denom);
            checked += 1;
        }
    }
    GradCheckReport { max_rel_error: max_rel, coords_checked: checked }
}
