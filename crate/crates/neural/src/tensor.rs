use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Dense row-major f64 tensor with cheap clones (shared storage,
/// copy-on-write through `Arc::make_mut`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: Arc::new(vec![0.0; n]) }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Self { shape: shape.to_vec(), data: Arc::new(data) }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_vec(&[1], vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.len(), 1, "item() needs a scalar tensor");
        self.data[0]
    }

    /// Same storage, new shape (element count must match).
    pub fn reshaped(&self, shape: &[usize]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.len());
        Self { shape: shape.to_vec(), data: self.data.clone() }
    }

    pub fn add_in_place(&mut self, other: &Tensor) {
        debug_assert_eq!(self.len(), other.len());
        let dst = self.data_mut();
        for (d, s) in dst.iter_mut().zip(other.data()) {
            *d += s;
        }
    }

    /// Uniform init in `[-bound, bound]` with fan-in scaling
    /// `bound = 1/sqrt(fan_in)`.
    pub fn uniform_fan_in(shape: &[usize], fan_in: usize, rng: &mut ChaCha12Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Self::from_vec(shape, data)
    }

    /// Uniform init with an explicit bound.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha12Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Self::from_vec(shape, data)
    }
}
