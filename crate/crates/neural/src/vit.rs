use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::NeuralError;
use crate::fno::{Param, ParamBinding};
use crate::graph::{Bcast3, Graph, NodeId};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct VitConfig {
    /// Number of transformer blocks; shifts alternate 0, w/2, 0, ...
    pub depth: usize,
    pub embed_dim: usize,
    pub patch_size: usize,
    /// Window edge in tokens.
    pub window_size: usize,
    pub n_heads: usize,
    pub mlp_ratio: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for VitConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            embed_dim: 90,
            patch_size: 4,
            window_size: 8,
            n_heads: 6,
            mlp_ratio: 4,
            in_channels: 5,
            out_channels: 2,
        }
    }
}

impl VitConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.embed_dim % self.n_heads != 0 {
            return Err(NeuralError::Config(format!(
                "embed_dim {} not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.depth == 0 || self.patch_size == 0 || self.window_size == 0 {
            return Err(NeuralError::Config("depth/patch/window must be positive".into()));
        }
        Ok(())
    }

    /// Per-block parameter count.
    pub fn block_params(&self) -> usize {
        let d = self.embed_dim;
        let r = self.mlp_ratio;
        let table = self.n_heads * (2 * self.window_size - 1).pow(2);
        2 * d + (d * 3 * d + 3 * d) + table + (d * d + d) + 2 * d + (d * r * d + r * d) + (r * d * d + d)
    }

    /// Exact trainable-scalar count for a given input grid.
    pub fn count_params(&self, ny: usize, nx: usize) -> usize {
        let d = self.embed_dim;
        let ps = self.patch_size;
        let (ty, tx) = (ny.div_ceil(ps), nx.div_ceil(ps));
        let patch = self.in_channels * ps * ps * d + d + ty * tx * d;
        let head = 2 * d + d * self.out_channels * ps * ps + self.out_channels * ps * ps;
        patch + self.depth * self.block_params() + head
    }
}

/// Precomputed index maps for one input geometry.
struct TokenGeometry {
    ny: usize,
    nx: usize,
    ty: usize,
    tx: usize,
    /// Token grid padded to window multiples.
    tty: usize,
    ttx: usize,
    n_windows: usize,
    patchify: Arc<Vec<i64>>,
    token_pad: Option<Arc<Vec<i64>>>,
    valid_rows: Arc<Vec<u32>>,
    /// Partition permutations for shift index 0 (no shift) and 1 (w/2).
    part: [Arc<Vec<u32>>; 2],
    unpart: [Arc<Vec<u32>>; 2],
    /// Additive attention masks per shift index.
    masks: [Option<Tensor>; 2],
    relpos_idx: Arc<Vec<i64>>,
    unpatch: Arc<Vec<i64>>,
}

fn reflect_idx(t: usize, n: usize) -> usize {
    if t < n {
        t
    } else {
        2 * n - 2 - t
    }
}

fn build_geometry(cfg: &VitConfig, ny: usize, nx: usize) -> TokenGeometry {
    let ps = cfg.patch_size;
    let w = cfg.window_size;
    let d = cfg.embed_dim;
    let (ty, tx) = (ny.div_ceil(ps), nx.div_ceil(ps));
    let (ny_pad, nx_pad) = (ty * ps, tx * ps);
    let (tty, ttx) = (ty.div_ceil(w) * w, tx.div_ceil(w) * w);
    let n_tokens = tty * ttx;
    let n_windows = (tty / w) * (ttx / w);

    // Patchify with reflected field padding folded in: token row t, col
    // (c, dy, dx) reads channel c at the mirrored source pixel.
    let c_in = cfg.in_channels;
    let mut patchify = Vec::with_capacity(ty * tx * c_in * ps * ps);
    for py in 0..ty {
        for px in 0..tx {
            for c in 0..c_in {
                for dy in 0..ps {
                    for dx in 0..ps {
                        let gy = reflect_idx(py * ps + dy, ny);
                        let gx = reflect_idx(px * ps + dx, nx);
                        let _ = nx_pad.max(ny_pad);
                        patchify.push(((c * ny + gy) * nx + gx) as i64);
                    }
                }
            }
        }
    }

    let token_pad = if tty == ty && ttx == tx {
        None
    } else {
        let mut idx = Vec::with_capacity(n_tokens * d);
        for gy in 0..tty {
            for gx in 0..ttx {
                for k in 0..d {
                    if gy < ty && gx < tx {
                        idx.push(((gy * tx + gx) * d + k) as i64);
                    } else {
                        idx.push(-1);
                    }
                }
            }
        }
        Some(Arc::new(idx))
    };

    let mut valid_rows = Vec::with_capacity(ty * tx);
    for gy in 0..ty {
        for gx in 0..tx {
            valid_rows.push((gy * ttx + gx) as u32);
        }
    }

    let shift_amounts = [0usize, w / 2];
    let mut part = Vec::new();
    let mut unpart = Vec::new();
    let mut masks = Vec::new();
    for &s in &shift_amounts {
        let mut p = vec![0u32; n_tokens];
        let mut q = vec![0u32; n_tokens];
        let wy_count = ttx / w;
        for wy in 0..tty / w {
            for wx in 0..wy_count {
                for py in 0..w {
                    for px in 0..w {
                        let r = ((wy * wy_count + wx) * w + py) * w + px;
                        let gy = (wy * w + py + s) % tty;
                        let gx = (wx * w + px + s) % ttx;
                        let src = gy * ttx + gx;
                        p[r] = src as u32;
                        q[src] = r as u32;
                    }
                }
            }
        }
        // Region ids: padded tokens isolated; shifted layouts use the
        // 3x3 slice pattern so wrapped-around windows cannot mix.
        let mut ids = vec![0i64; n_tokens];
        for gy in 0..tty {
            for gx in 0..ttx {
                let t = gy * ttx + gx;
                if gy >= ty || gx >= tx {
                    ids[t] = -1;
                } else if s > 0 {
                    let sy = if gy < tty - w {
                        0
                    } else if gy < tty - s {
                        1
                    } else {
                        2
                    };
                    let sx = if gx < ttx - w {
                        0
                    } else if gx < ttx - s {
                        1
                    } else {
                        2
                    };
                    ids[t] = (3 * sy + sx) as i64;
                }
            }
        }
        let needs_mask = s > 0 || token_pad.is_some();
        let mask = if needs_mask {
            let w2 = w * w;
            let mut m = Tensor::zeros(&[n_windows, w2, w2]);
            {
                let md = m.data_mut();
                for win in 0..n_windows {
                    for a in 0..w2 {
                        let ia = ids[p[win * w2 + a] as usize];
                        for b in 0..w2 {
                            let ib = ids[p[win * w2 + b] as usize];
                            if ia != ib {
                                md[(win * w2 + a) * w2 + b] = -1e9;
                            }
                        }
                    }
                }
            }
            Some(m)
        } else {
            None
        };
        part.push(Arc::new(p));
        unpart.push(Arc::new(q));
        masks.push(mask);
    }

    // Relative-position bias lookup: per head, offset (dy, dx) in
    // (2w-1)^2 table entries.
    let w2 = w * w;
    let span = 2 * w - 1;
    let mut relpos_idx = Vec::with_capacity(cfg.n_heads * w2 * w2);
    for h in 0..cfg.n_heads {
        for a in 0..w2 {
            let (ay, ax) = (a / w, a % w);
            for b in 0..w2 {
                let (by, bx) = (b / w, b % w);
                let dy = ay as i64 - by as i64 + (w as i64 - 1);
                let dx = ax as i64 - bx as i64 + (w as i64 - 1);
                relpos_idx.push((h * span * span) as i64 + dy * span as i64 + dx);
            }
        }
    }

    // Head output back to the field: output pixel (c, y, x) from token
    // (y/ps, x/ps), column (c, y%ps, x%ps).
    let out_c = cfg.out_channels;
    let mut unpatch = Vec::with_capacity(out_c * ny * nx);
    for c in 0..out_c {
        for y in 0..ny {
            for x in 0..nx {
                let t = (y / ps) * tx + (x / ps);
                let col = (c * ps + y % ps) * ps + (x % ps);
                unpatch.push((t * out_c * ps * ps + col) as i64);
            }
        }
    }

    TokenGeometry {
        ny,
        nx,
        ty,
        tx,
        tty,
        ttx,
        n_windows,
        patchify: Arc::new(patchify),
        token_pad,
        valid_rows: Arc::new(valid_rows),
        part: [part[0].clone(), part[1].clone()],
        unpart: [unpart[0].clone(), unpart[1].clone()],
        masks: [masks[0].clone(), masks[1].clone()],
        relpos_idx: Arc::new(relpos_idx),
        unpatch: Arc::new(unpatch),
    }
}

/// Patch-based transformer with shifted-window attention, constructed
/// for a fixed input grid (the learned positional embedding is
/// per-token).
pub struct VitModel {
    pub cfg: VitConfig,
    pub params: Vec<Param>,
    geo: TokenGeometry,
}

impl VitModel {
    pub fn new(cfg: VitConfig, ny: usize, nx: usize, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let geo = build_geometry(&cfg, ny, nx);
        let d = cfg.embed_dim;
        let ps = cfg.patch_size;
        let r = cfg.mlp_ratio;
        let span2 = (2 * cfg.window_size - 1).pow(2);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut push = |name: String, t: Tensor| params.push(Param { name, tensor: t });

        let patch_in = cfg.in_channels * ps * ps;
        push("patch.w".into(), Tensor::uniform_fan_in(&[patch_in, d], patch_in, &mut rng));
        push("patch.b".into(), Tensor::zeros(&[d]));
        push("pos".into(), Tensor::uniform(&[geo.ty * geo.tx, d], 0.02, &mut rng));
        for l in 0..cfg.depth {
            push(format!("blk{l}.ln1.g"), ones(&[d]));
            push(format!("blk{l}.ln1.b"), Tensor::zeros(&[d]));
            push(format!("blk{l}.qkv.w"), Tensor::uniform_fan_in(&[d, 3 * d], d, &mut rng));
            push(format!("blk{l}.qkv.b"), Tensor::zeros(&[3 * d]));
            push(format!("blk{l}.relpos"), Tensor::zeros(&[cfg.n_heads, span2]));
            push(format!("blk{l}.proj.w"), Tensor::uniform_fan_in(&[d, d], d, &mut rng));
            push(format!("blk{l}.proj.b"), Tensor::zeros(&[d]));
            push(format!("blk{l}.ln2.g"), ones(&[d]));
            push(format!("blk{l}.ln2.b"), Tensor::zeros(&[d]));
            push(format!("blk{l}.mlp1.w"), Tensor::uniform_fan_in(&[d, r * d], d, &mut rng));
            push(format!("blk{l}.mlp1.b"), Tensor::zeros(&[r * d]));
            push(format!("blk{l}.mlp2.w"), Tensor::uniform_fan_in(&[r * d, d], r * d, &mut rng));
            push(format!("blk{l}.mlp2.b"), Tensor::zeros(&[d]));
        }
        push("ln_f.g".into(), ones(&[d]));
        push("ln_f.b".into(), Tensor::zeros(&[d]));
        let head_out = cfg.out_channels * ps * ps;
        push("head.w".into(), Tensor::uniform_fan_in(&[d, head_out], d, &mut rng));
        push("head.b".into(), Tensor::zeros(&[head_out]));
        Ok(Self { cfg, params, geo })
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.geo.ny, self.geo.nx)
    }

    pub fn count_params(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Windowed multi-head attention on already-normalized tokens
    /// `(T, D)`: shift, partition, per-head scaled dot-product with
    /// relative-position bias and region masking, merge, reverse shift,
    /// output projection.
    #[allow(clippy::too_many_arguments)]
    fn windowed_attention(
        &self,
        g: &mut Graph,
        tokens: NodeId,
        shift_idx: usize,
        qkv_w: NodeId,
        qkv_b: NodeId,
        relpos: NodeId,
        proj_w: NodeId,
        proj_b: NodeId,
    ) -> NodeId {
        let cfg = &self.cfg;
        let geo = &self.geo;
        let d = cfg.embed_dim;
        let h = cfg.n_heads;
        let dh = d / h;
        let w2 = cfg.window_size * cfg.window_size;
        let n_w = geo.n_windows;

        let mut cur = g.matmul(tokens, qkv_w);
        cur = g.bias_rows(cur, qkv_b);
        // To window order (shift folded into the permutation).
        let cur = g.permute_rows(cur, geo.part[shift_idx].clone(), 3 * d);
        // (nW, w2, 3H, dh) -> (nW, 3H, w2, dh)
        let cur = g.swap_mid(cur, (n_w, w2, 3 * h, dh));
        let cur = g.reshape(cur, &[n_w * 3 * h, w2 * dh]);
        let mut rows_q = Vec::with_capacity(n_w * h);
        let mut rows_k = Vec::with_capacity(n_w * h);
        let mut rows_v = Vec::with_capacity(n_w * h);
        for win in 0..n_w {
            for head in 0..h {
                rows_q.push((win * 3 * h + head) as u32);
                rows_k.push((win * 3 * h + h + head) as u32);
                rows_v.push((win * 3 * h + 2 * h + head) as u32);
            }
        }
        let q = g.permute_rows(cur, Arc::new(rows_q), w2 * dh);
        let k = g.permute_rows(cur, Arc::new(rows_k), w2 * dh);
        let v = g.permute_rows(cur, Arc::new(rows_v), w2 * dh);
        let q = g.reshape(q, &[n_w * h, w2, dh]);
        let k = g.reshape(k, &[n_w * h, w2, dh]);
        let v = g.reshape(v, &[n_w * h, w2, dh]);

        let kt = g.transpose_last2(k);
        let mut scores = g.bmm(q, kt);
        scores = g.scale(scores, 1.0 / (dh as f64).sqrt());
        // Learned relative-position bias, shared across windows.
        let bias = g.gather(relpos, geo.relpos_idx.clone(), &[h, w2, w2]);
        scores = g.add_bcast3(scores, bias, Bcast3::Mod);
        if let Some(mask) = &geo.masks[shift_idx] {
            let mask_id = g.leaf(mask.clone());
            scores = g.add_bcast3(scores, mask_id, Bcast3::Div);
        }
        let attn = g.softmax_last(scores);
        let ctx = g.bmm(attn, v); // (nW*H, w2, dh)

        let ctx = g.reshape(ctx, &[n_w, h, w2, dh]);
        let ctx = g.swap_mid(ctx, (n_w, h, w2, dh)); // (nW, w2, H, dh)
        let ctx = g.reshape(ctx, &[n_w * w2, d]);
        let ctx = g.permute_rows(ctx, geo.unpart[shift_idx].clone(), d);
        let mut out = g.matmul(ctx, proj_w);
        out = g.bias_rows(out, proj_b);
        out
    }

    /// Builds the forward graph for one `(in_channels, ny, nx)` input.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: NodeId,
    ) -> Result<(NodeId, ParamBinding), NeuralError> {
        let cfg = &self.cfg;
        let geo = &self.geo;
        let shape = g.value(x).shape().to_vec();
        if shape != [cfg.in_channels, geo.ny, geo.nx] {
            return Err(NeuralError::Shape(format!(
                "ViT built for ({}, {}, {}), got {:?}",
                cfg.in_channels, geo.ny, geo.nx, shape
            )));
        }
        let d = cfg.embed_dim;
        let ps = cfg.patch_size;

        let binding: ParamBinding =
            self.params.iter().map(|p| g.leaf(p.tensor.clone())).collect();
        let mut k = 0usize;
        let mut next = || {
            k += 1;
            binding[k - 1]
        };

        let patch_w = next();
        let patch_b = next();
        let pos = next();

        let patches = g.gather(
            x,
            geo.patchify.clone(),
            &[geo.ty * geo.tx, cfg.in_channels * ps * ps],
        );
        let mut tokens = g.matmul(patches, patch_w);
        tokens = g.bias_rows(tokens, patch_b);
        tokens = g.add(tokens, pos);
        let mut tokens = match &geo.token_pad {
            Some(map) => g.gather(tokens, map.clone(), &[geo.tty * geo.ttx, d]),
            None => tokens,
        };

        for l in 0..cfg.depth {
            let ln1g = next();
            let ln1b = next();
            let qkv_w = next();
            let qkv_b = next();
            let relpos = next();
            let proj_w = next();
            let proj_b = next();
            let ln2g = next();
            let ln2b = next();
            let m1w = next();
            let m1b = next();
            let m2w = next();
            let m2b = next();

            let shift_idx = l % 2;
            let normed = g.layer_norm(tokens, ln1g, ln1b, 1e-5);
            let attn_out =
                self.windowed_attention(g, normed, shift_idx, qkv_w, qkv_b, relpos, proj_w, proj_b);
            tokens = g.add(tokens, attn_out);
            let normed2 = g.layer_norm(tokens, ln2g, ln2b, 1e-5);
            let mut mlp = g.matmul(normed2, m1w);
            mlp = g.bias_rows(mlp, m1b);
            mlp = g.gelu(mlp);
            let mut mlp2 = g.matmul(mlp, m2w);
            mlp2 = g.bias_rows(mlp2, m2b);
            tokens = g.add(tokens, mlp2);
        }

        let lnf_g = next();
        let lnf_b = next();
        let head_w = next();
        let head_b = next();
        let tokens = g.layer_norm(tokens, lnf_g, lnf_b, 1e-5);
        let valid = g.permute_rows(tokens, geo.valid_rows.clone(), d);
        let mut out = g.matmul(valid, head_w);
        out = g.bias_rows(out, head_b);
        let field = g.gather(
            out,
            geo.unpatch.clone(),
            &[cfg.out_channels, geo.ny, geo.nx],
        );
        Ok((field, binding))
    }

    /// Token-grid dims after padding (tests).
    pub fn token_dims(&self) -> (usize, usize, usize, usize) {
        (self.geo.ty, self.geo.tx, self.geo.tty, self.geo.ttx)
    }
}

fn ones(shape: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = 1.0;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;
    use rand::Rng;

    fn tiny_cfg() -> VitConfig {
        VitConfig {
            depth: 2,
            embed_dim: 8,
            patch_size: 2,
            window_size: 2,
            n_heads: 2,
            mlp_ratio: 2,
            in_channels: 3,
            out_channels: 2,
        }
    }

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha12Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn output_shape_contract_with_and_without_padding() {
        // 8x8: 4x4 tokens, window 2 divides. 10x6: 5x3 tokens, padded to
        // 6x4.
        for &(ny, nx) in &[(8usize, 8usize), (10, 6)] {
            let model = VitModel::new(tiny_cfg(), ny, nx, 1).unwrap();
            let mut g = Graph::new();
            let x = g.leaf(Tensor::zeros(&[3, ny, nx]));
            let (y, _) = model.forward(&mut g, x).unwrap();
            assert_eq!(g.value(y).shape(), &[2, ny, nx], "grid {ny}x{nx}");
        }
    }

    #[test]
    fn param_count_matches_closed_form_and_block_additivity() {
        let cfg = tiny_cfg();
        let m2 = VitModel::new(cfg.clone(), 8, 8, 1).unwrap();
        assert_eq!(m2.count_params(), cfg.count_params(8, 8));
        let cfg4 = VitConfig { depth: 4, ..cfg.clone() };
        let m4 = VitModel::new(cfg4.clone(), 8, 8, 1).unwrap();
        assert_eq!(m4.count_params() - m2.count_params(), 2 * cfg.block_params());
    }

    #[test]
    fn depth_prefix_shapes_match() {
        let cfg2 = tiny_cfg();
        let cfg4 = VitConfig { depth: 4, ..cfg2.clone() };
        let m2 = VitModel::new(cfg2, 8, 8, 1).unwrap();
        let m4 = VitModel::new(cfg4, 8, 8, 1).unwrap();
        // Common prefix: everything up to the final norm + head.
        let prefix = m2.params.len() - 4;
        for i in 0..prefix {
            assert_eq!(m2.params[i].name, m4.params[i].name);
            assert_eq!(m2.params[i].tensor.shape(), m4.params[i].tensor.shape());
        }
    }

    #[test]
    fn invalid_head_split_rejected() {
        let cfg = VitConfig { embed_dim: 9, n_heads: 2, ..tiny_cfg() };
        assert!(VitModel::new(cfg, 8, 8, 1).is_err());
    }

    #[test]
    fn shift0_jacobian_is_window_block_diagonal() {
        // patch 1 + window 2 on a 4x4 grid: perturbing a pixel in one
        // window must leave other windows' outputs bitwise unchanged
        // (depth 1, shift 0).
        let cfg = VitConfig {
            depth: 1,
            embed_dim: 8,
            patch_size: 1,
            window_size: 2,
            n_heads: 2,
            mlp_ratio: 2,
            in_channels: 2,
            out_channels: 2,
        };
        let model = VitModel::new(cfg, 4, 4, 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let x0 = rand_tensor(&[2, 4, 4], &mut rng);
        let mut x1 = x0.clone();
        x1.data_mut()[0] += 0.5; // pixel (0,0), channel 0, window (0,0)

        let run = |x: &Tensor| {
            let mut g = Graph::new();
            let id = g.leaf(x.clone());
            let (y, _) = model.forward(&mut g, id).unwrap();
            g.value(y).clone()
        };
        let y0 = run(&x0);
        let y1 = run(&x1);
        let mut changed_own_window = false;
        for c in 0..2 {
            for y in 0..4 {
                for x in 0..4 {
                    let k = (c * 4 + y) * 4 + x;
                    let same_window = y < 2 && x < 2;
                    if same_window {
                        changed_own_window |= y0.data()[k] != y1.data()[k];
                    } else {
                        assert_eq!(
                            y0.data()[k],
                            y1.data()[k],
                            "cross-window leakage at (c={c}, y={y}, x={x})"
                        );
                    }
                }
            }
        }
        assert!(changed_own_window);
    }

    #[test]
    fn shifted_blocks_extend_connectivity() {
        // With two blocks (shift 0 then w/2) a perturbation escapes its
        // own window.
        let cfg = VitConfig {
            depth: 2,
            embed_dim: 8,
            patch_size: 1,
            window_size: 2,
            n_heads: 2,
            mlp_ratio: 2,
            in_channels: 2,
            out_channels: 2,
        };
        let model = VitModel::new(cfg, 4, 4, 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x0 = rand_tensor(&[2, 4, 4], &mut rng);
        let mut x1 = x0.clone();
        x1.data_mut()[0] += 0.5;
        let run = |x: &Tensor| {
            let mut g = Graph::new();
            let id = g.leaf(x.clone());
            let (y, _) = model.forward(&mut g, id).unwrap();
            g.value(y).clone()
        };
        let y0 = run(&x0);
        let y1 = run(&x1);
        let mut outside_changed = false;
        for c in 0..2 {
            for y in 0..4 {
                for x in 0..4 {
                    let k = (c * 4 + y) * 4 + x;
                    if !(y < 2 && x < 2) && y0.data()[k] != y1.data()[k] {
                        outside_changed = true;
                    }
                }
            }
        }
        assert!(outside_changed, "shifted block should spread influence across windows");
    }

    #[test]
    fn uniform_attention_averages_value_projections() {
        // Zeroed Q/K weights and biases, identity V and projection:
        // every output token equals the window mean of the tokens.
        let cfg = VitConfig {
            depth: 1,
            embed_dim: 4,
            patch_size: 1,
            window_size: 2,
            n_heads: 1,
            mlp_ratio: 1,
            in_channels: 1,
            out_channels: 1,
        };
        let model = VitModel::new(cfg.clone(), 2, 2, 0).unwrap();
        let d = 4;
        let mut qkv = Tensor::zeros(&[d, 3 * d]);
        for i in 0..d {
            qkv.data_mut()[i * 3 * d + 2 * d + i] = 1.0; // V = identity
        }
        let qkv_b = Tensor::zeros(&[3 * d]);
        let relpos = Tensor::zeros(&[1, 9]);
        let mut proj = Tensor::zeros(&[d, d]);
        for i in 0..d {
            proj.data_mut()[i * d + i] = 1.0;
        }
        let proj_b = Tensor::zeros(&[d]);

        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let tokens = rand_tensor(&[4, d], &mut rng);
        let mut g = Graph::new();
        let tid = g.leaf(tokens.clone());
        let ids: Vec<NodeId> = [qkv, qkv_b, relpos, proj, proj_b]
            .into_iter()
            .map(|t| g.leaf(t))
            .collect();
        let out = model.windowed_attention(&mut g, tid, 0, ids[0], ids[1], ids[2], ids[3], ids[4]);
        let got = g.value(out).clone();
        let mut mean = vec![0.0; d];
        for t in 0..4 {
            for c in 0..d {
                mean[c] += tokens.data()[t * d + c] / 4.0;
            }
        }
        for t in 0..4 {
            for c in 0..d {
                assert!(
                    (got.data()[t * d + c] - mean[c]).abs() < 1e-12,
                    "token {t} channel {c}"
                );
            }
        }
    }

    #[test]
    fn permuting_tokens_within_window_permutes_outputs() {
        // Bias table zero, no shift, single window, zero positional
        // embedding: attention is permutation-equivariant.
        let cfg = VitConfig {
            depth: 1,
            embed_dim: 6,
            patch_size: 1,
            window_size: 2,
            n_heads: 2,
            mlp_ratio: 2,
            in_channels: 2,
            out_channels: 2,
        };
        let mut model = VitModel::new(cfg, 2, 2, 7).unwrap();
        for p in model.params.iter_mut() {
            if p.name == "pos" || p.name.ends_with("relpos") {
                p.tensor = Tensor::zeros(p.tensor.shape());
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let x0 = rand_tensor(&[2, 2, 2], &mut rng);
        // Swap pixels (0,0) and (1,1) in both channels.
        let mut x1 = x0.clone();
        for c in 0..2 {
            let a = (c * 2) * 2;
            let b = (c * 2 + 1) * 2 + 1;
            let tmp = x1.data()[a];
            x1.data_mut()[a] = x1.data()[b];
            x1.data_mut()[b] = tmp;
        }
        let run = |x: &Tensor| {
            let mut g = Graph::new();
            let id = g.leaf(x.clone());
            let (y, _) = model.forward(&mut g, id).unwrap();
            g.value(y).clone()
        };
        let y0 = run(&x0);
        let y1 = run(&x1);
        for c in 0..2 {
            let a = (c * 2) * 2;
            let b = (c * 2 + 1) * 2 + 1;
            assert!((y0.data()[a] - y1.data()[b]).abs() < 1e-12);
            assert!((y0.data()[b] - y1.data()[a]).abs() < 1e-12);
            // Off-diagonal pixels unchanged.
            let o1 = (c * 2) * 2 + 1;
            assert!((y0.data()[o1] - y1.data()[o1]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_block_gradient_check_on_4x4_tokens() {
        // Whole model (2 blocks incl. shifted) on an 8x8 field with
        // patch 2 -> 4x4 token grid.
        let model = VitModel::new(tiny_cfg(), 8, 8, 9).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let x = rand_tensor(&[3, 8, 8], &mut rng);
        let cot = rand_tensor(&[2, 8, 8], &mut rng);

        let mut g = Graph::new();
        let xid = g.leaf(x.clone());
        let (y, binding) = model.forward(&mut g, xid).unwrap();
        let loss = g.dot_const(y, cot.clone());
        g.backward(loss, 1.0);
        let params: Vec<Tensor> = model.params.iter().map(|p| p.tensor.clone()).collect();
        let analytic: Vec<Tensor> =
            binding.iter().map(|&id| g.grad(id).cloned().unwrap()).collect();

        let cfg = model.cfg.clone();
        let mut loss_fn = |ps: &[Tensor]| -> f64 {
            let mut m = VitModel::new(cfg.clone(), 8, 8, 0).unwrap();
            for (p, t) in m.params.iter_mut().zip(ps) {
                p.tensor = t.clone();
            }
            let mut g = Graph::new();
            let xid = g.leaf(x.clone());
            let (y, _) = m.forward(&mut g, xid).unwrap();
            let l = g.dot_const(y, cot.clone());
            g.value(l).item()
        };
        let rep = grad_check(&params, &analytic, &mut loss_fn, 1e-6, 32, 11);
        assert!(rep.max_rel_error < 1e-5, "ViT grad check {}", rep.max_rel_error);
    }

    #[test]
    fn forward_rejects_wrong_grid() {
        let model = VitModel::new(tiny_cfg(), 8, 8, 1).unwrap();
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[3, 6, 6]));
        assert!(model.forward(&mut g, x).is_err());
    }
}
