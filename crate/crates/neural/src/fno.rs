use std::cell::RefCell;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::NeuralError;
use crate::graph::{Graph, NodeId};
use crate::spectral::{clip_modes, SpectralBasis};
use crate::tensor::Tensor;

/// Named trainable tensor.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
}

/// Node ids of the parameter leaves created for one forward pass, in
/// declaration order.
pub type ParamBinding = Vec<NodeId>;

#[derive(Debug, Clone, PartialEq)]
pub struct FnoConfig {
    pub n_layers: usize,
    pub hidden_channels: usize,
    pub modes_y: usize,
    pub modes_x: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub proj_width: usize,
}

impl Default for FnoConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            hidden_channels: 64,
            modes_y: 64,
            modes_x: 64,
            in_channels: 4,
            out_channels: 2,
            proj_width: 128,
        }
    }
}

impl FnoConfig {
    /// Clips the mode counts to the Nyquist of a target grid; returns
    /// the adjusted config and whether clipping occurred (callers log
    /// it).
    pub fn clipped_for(&self, ny: usize, nx: usize) -> (Self, bool) {
        let my = clip_modes(self.modes_y, ny);
        let mx = clip_modes(self.modes_x, nx);
        let clipped = my != self.modes_y || mx != self.modes_x;
        (Self { modes_y: my, modes_x: mx, ..self.clone() }, clipped)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.n_layers == 0 {
            return Err(NeuralError::Config("FNO needs at least one layer".into()));
        }
        if self.hidden_channels == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(NeuralError::Config("FNO channel counts must be positive".into()));
        }
        Ok(())
    }

    /// Exact trainable-scalar count.
    pub fn count_params(&self) -> usize {
        let h = self.hidden_channels;
        let spectral = h * h * self.modes_y * self.modes_x * 2;
        let per_layer = spectral + h * h + h;
        let lift = h * self.in_channels + h;
        let proj = self.proj_width * h
            + self.proj_width
            + self.out_channels * self.proj_width
            + self.out_channels;
        lift + self.n_layers * per_layer + proj
    }
}

/// Fourier neural operator: pointwise lifting, `n_layers` spectral
/// layers with a linear bypass and GELU, pointwise two-stage projection.
pub struct FnoModel {
    pub cfg: FnoConfig,
    pub params: Vec<Param>,
    basis_cache: RefCell<Vec<((usize, usize), Arc<SpectralBasis>)>>,
}

impl FnoModel {
    pub fn new(cfg: FnoConfig, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let h = cfg.hidden_channels;
        let mut params = Vec::new();
        let mut push = |name: &str, t: Tensor| params.push(Param { name: name.into(), tensor: t });

        push("lift.w", Tensor::uniform_fan_in(&[h, cfg.in_channels], cfg.in_channels, &mut rng));
        push("lift.b", Tensor::zeros(&[h]));
        for l in 0..cfg.n_layers {
            let scale = 1.0 / (h * h) as f64;
            push(
                &format!("layer{l}.spectral"),
                Tensor::uniform(&[h, h, cfg.modes_y, cfg.modes_x, 2], scale, &mut rng),
            );
            push(&format!("layer{l}.bypass.w"), Tensor::uniform_fan_in(&[h, h], h, &mut rng));
            push(&format!("layer{l}.bypass.b"), Tensor::zeros(&[h]));
        }
        push("proj1.w", Tensor::uniform_fan_in(&[cfg.proj_width, h], h, &mut rng));
        push("proj1.b", Tensor::zeros(&[cfg.proj_width]));
        push(
            "proj2.w",
            Tensor::uniform_fan_in(&[cfg.out_channels, cfg.proj_width], cfg.proj_width, &mut rng),
        );
        push("proj2.b", Tensor::zeros(&[cfg.out_channels]));
        Ok(Self { cfg, params, basis_cache: RefCell::new(Vec::new()) })
    }

    pub fn count_params(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    fn basis(&self, ny: usize, nx: usize) -> Arc<SpectralBasis> {
        let key = (ny, nx);
        let mut cache = self.basis_cache.borrow_mut();
        if let Some((_, b)) = cache.iter().find(|(k, _)| *k == key) {
            return b.clone();
        }
        let b = SpectralBasis::new(ny, nx, self.cfg.modes_y, self.cfg.modes_x);
        cache.push((key, b.clone()));
        b
    }

    /// Builds the forward graph for one `(in_channels, ny, nx)` input.
    /// Returns the `(out_channels, ny, nx)` output node and the
    /// parameter bindings for gradient extraction.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: NodeId,
    ) -> Result<(NodeId, ParamBinding), NeuralError> {
        let shape = g.value(x).shape().to_vec();
        if shape.len() != 3 || shape[0] != self.cfg.in_channels {
            return Err(NeuralError::Shape(format!(
                "FNO expects ({}, ny, nx), got {:?}",
                self.cfg.in_channels, shape
            )));
        }
        let (ny, nx) = (shape[1], shape[2]);
        if self.cfg.modes_y > ny / 2 || self.cfg.modes_x > nx / 2 {
            return Err(NeuralError::Config(format!(
                "modes ({}, {}) exceed the Nyquist of a {}x{} grid",
                self.cfg.modes_y, self.cfg.modes_x, ny, nx
            )));
        }
        let npix = ny * nx;
        let h = self.cfg.hidden_channels;
        let basis = self.basis(ny, nx);

        let binding: ParamBinding =
            self.params.iter().map(|p| g.leaf(p.tensor.clone())).collect();
        let mut k = 0usize;
        let mut next = || {
            k += 1;
            binding[k - 1]
        };

        let lift_w = next();
        let lift_b = next();
        let x_flat = g.reshape(x, &[self.cfg.in_channels, npix]);
        let mut cur = g.matmul(lift_w, x_flat);
        cur = g.bias_channels(cur, lift_b);
        let mut cur3 = g.reshape(cur, &[h, ny, nx]);

        for _ in 0..self.cfg.n_layers {
            let w_spec = next();
            let w_byp = next();
            let b_byp = next();
            let sc = g.spectral_conv2d(cur3, w_spec, basis.clone());
            let flat = g.reshape(cur3, &[h, npix]);
            let mut byp = g.matmul(w_byp, flat);
            byp = g.bias_channels(byp, b_byp);
            let byp3 = g.reshape(byp, &[h, ny, nx]);
            let summed = g.add(sc, byp3);
            cur3 = g.gelu(summed);
        }

        let p1w = next();
        let p1b = next();
        let p2w = next();
        let p2b = next();
        let flat = g.reshape(cur3, &[h, npix]);
        let mut p = g.matmul(p1w, flat);
        p = g.bias_channels(p, p1b);
        p = g.gelu(p);
        let mut out = g.matmul(p2w, p);
        out = g.bias_channels(out, p2b);
        let out3 = g.reshape(out, &[self.cfg.out_channels, ny, nx]);
        Ok((out3, binding))
    }
}
