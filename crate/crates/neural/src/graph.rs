use std::sync::Arc;

use ndarray::ArrayView2;

use crate::spectral::SpectralBasis;
use crate::tensor::Tensor;

pub type NodeId = usize;

type BackFn = Box<dyn Fn(&Tensor, &mut dyn FnMut(NodeId, Tensor))>;

/// Dynamic reverse-mode computation graph. Nodes are appended during the
/// forward pass; `backward` walks them in reverse, accumulating parent
/// gradients in a fixed order so results are bit-reproducible.
#[derive(Default)]
pub struct Graph {
    values: Vec<Tensor>,
    backs: Vec<Option<BackFn>>,
    grads: Vec<Option<Tensor>>,
}

fn mm(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let av = ArrayView2::from_shape((m, k), a).unwrap();
    let bv = ArrayView2::from_shape((k, n), b).unwrap();
    let mut out = Vec::with_capacity(m * n);
    out.extend(av.dot(&bv).iter());
    out
}

fn mm_nt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    // a (m,k) * b^T where b is (n,k)
    let av = ArrayView2::from_shape((m, k), a).unwrap();
    let bv = ArrayView2::from_shape((n, k), b).unwrap();
    let mut out = Vec::with_capacity(m * n);
    out.extend(av.dot(&bv.t()).iter());
    out
}

fn mm_tn(a: &[f64], k: usize, m: usize, b: &[f64], n: usize) -> Vec<f64> {
    // a^T * b where a is (k,m), b is (k,n)
    let av = ArrayView2::from_shape((k, m), a).unwrap();
    let bv = ArrayView2::from_shape((k, n), b).unwrap();
    let mut out = Vec::with_capacity(m * n);
    out.extend(av.t().dot(&bv).iter());
    out
}

const GELU_S: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

fn gelu_val(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_S * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_S * (x + GELU_C * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_S * (1.0 + 3.0 * GELU_C * x * x)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id]
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id].as_ref()
    }

    fn push(&mut self, value: Tensor, back: Option<BackFn>) -> NodeId {
        self.values.push(value);
        self.backs.push(back);
        self.grads.push(None);
        self.values.len() - 1
    }

    /// Input or parameter node.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(t, None)
    }

    /// Seeds `d loss / d loss = seed` at `root` and accumulates
    /// gradients for every node that feeds it.
    pub fn backward(&mut self, root: NodeId, seed: f64) {
        for g in self.grads.iter_mut() {
            *g = None;
        }
        let mut seed_t = Tensor::zeros(self.values[root].shape());
        for v in seed_t.data_mut() {
            *v = seed;
        }
        self.grads[root] = Some(seed_t);
        for id in (0..=root).rev() {
            let Some(g) = self.grads[id].clone() else { continue };
            let Some(back) = self.backs[id].as_ref() else { continue };
            let mut contributions: Vec<(NodeId, Tensor)> = Vec::new();
            back(&g, &mut |pid, contrib| contributions.push((pid, contrib)));
            for (pid, contrib) in contributions {
                match &mut self.grads[pid] {
                    Some(acc) => acc.add_in_place(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a], &self.values[b]);
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let mut out = ta.clone();
        out.add_in_place(tb);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, g.clone());
                sink(b, g.clone());
            })),
        )
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a], &self.values[b]);
        assert_eq!(ta.shape(), tb.shape(), "sub shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, g.clone());
                let mut neg = g.clone();
                for v in neg.data_mut() {
                    *v = -*v;
                }
                sink(b, neg);
            })),
        )
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.values[a].clone(), self.values[b].clone());
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut ga = g.clone();
                for (v, s) in ga.data_mut().iter_mut().zip(tb.data()) {
                    *v *= s;
                }
                sink(a, ga);
                let mut gb = g.clone();
                for (v, s) in gb.data_mut().iter_mut().zip(ta.data()) {
                    *v *= s;
                }
                sink(b, gb);
            })),
        )
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let ta = &self.values[a];
        let data = ta.data().iter().map(|x| c * x).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut ga = g.clone();
                for v in ga.data_mut() {
                    *v *= c;
                }
                sink(a, ga);
            })),
        )
    }

    /// `a (m,k) x b (k,n)`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.values[a].clone(), self.values[b].clone());
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let (k2, n) = (tb.shape()[0], tb.shape()[1]);
        assert_eq!(k, k2, "matmul inner dims");
        let out = Tensor::from_vec(&[m, n], mm(ta.data(), m, k, tb.data(), n));
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let ga = mm_nt(g.data(), m, n, tb.data(), k);
                sink(a, Tensor::from_vec(&[m, k], ga));
                let gb = mm_tn(ta.data(), m, k, g.data(), n);
                sink(b, Tensor::from_vec(&[k, n], gb));
            })),
        )
    }

    /// Batched `a (B,m,k) x b (B,k,n)`.
    pub fn bmm(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.values[a].clone(), self.values[b].clone());
        let (bs, m, k) = (ta.shape()[0], ta.shape()[1], ta.shape()[2]);
        let (bs2, k2, n) = (tb.shape()[0], tb.shape()[1], tb.shape()[2]);
        assert!(bs == bs2 && k == k2, "bmm shape mismatch");
        let mut data = Vec::with_capacity(bs * m * n);
        for t in 0..bs {
            data.extend(mm(&ta.data()[t * m * k..(t + 1) * m * k], m, k, &tb.data()[t * k * n..(t + 1) * k * n], n));
        }
        let out = Tensor::from_vec(&[bs, m, n], data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut ga = Vec::with_capacity(bs * m * k);
                let mut gb = Vec::with_capacity(bs * k * n);
                for t in 0..bs {
                    let gt = &g.data()[t * m * n..(t + 1) * m * n];
                    ga.extend(mm_nt(gt, m, n, &tb.data()[t * k * n..(t + 1) * k * n], k));
                    gb.extend(mm_tn(&ta.data()[t * m * k..(t + 1) * m * k], m, k, gt, n));
                }
                sink(a, Tensor::from_vec(&[bs, m, k], ga));
                sink(b, Tensor::from_vec(&[bs, k, n], gb));
            })),
        )
    }

    /// `(B, m, n) -> (B, n, m)`.
    pub fn transpose_last2(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        let (bs, m, n) = (ta.shape()[0], ta.shape()[1], ta.shape()[2]);
        let transpose = move |src: &[f64], m: usize, n: usize| -> Vec<f64> {
            let mut out = vec![0.0; src.len()];
            for t in 0..bs {
                let o = t * m * n;
                for i in 0..m {
                    for j in 0..n {
                        out[o + j * m + i] = src[o + i * n + j];
                    }
                }
            }
            out
        };
        let out = Tensor::from_vec(&[bs, n, m], transpose(ta.data(), m, n));
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, Tensor::from_vec(&[bs, m, n], transpose(g.data(), n, m)));
            })),
        )
    }

    /// View with a new shape (same element order).
    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> NodeId {
        let out = self.values[a].reshaped(shape);
        let old_shape = self.values[a].shape().to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, g.reshaped(&old_shape));
            })),
        )
    }

    /// `(A,B,C,D) -> (A,C,B,D)` axis swap (head split/merge).
    pub fn swap_mid(&mut self, x: NodeId, dims: (usize, usize, usize, usize)) -> NodeId {
        let (da, db, dc, dd) = dims;
        let tx = &self.values[x];
        assert_eq!(tx.len(), da * db * dc * dd);
        let fwd = move |src: &[f64], b: usize, c: usize| -> Vec<f64> {
            let mut out = vec![0.0; src.len()];
            for ia in 0..da {
                for ib in 0..b {
                    for ic in 0..c {
                        let srow = ((ia * b + ib) * c + ic) * dd;
                        let drow = ((ia * c + ic) * b + ib) * dd;
                        out[drow..drow + dd].copy_from_slice(&src[srow..srow + dd]);
                    }
                }
            }
            out
        };
        let out = Tensor::from_vec(&[da, dc, db, dd], fwd(tx.data(), db, dc));
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, Tensor::from_vec(&[da, db, dc, dd], fwd(g.data(), dc, db)));
            })),
        )
    }

    /// Row permutation/selection of a `(R, C)` tensor: output row `i` is
    /// input row `perm[i]`. Backward scatter-adds, so `perm` may repeat
    /// rows (broadcast) or drop rows (crop).
    pub fn permute_rows(&mut self, a: NodeId, perm: Arc<Vec<u32>>, cols: usize) -> NodeId {
        let ta = &self.values[a];
        let in_rows = ta.len() / cols;
        let out_rows = perm.len();
        let mut data = Vec::with_capacity(out_rows * cols);
        for &p in perm.iter() {
            let p = p as usize;
            debug_assert!(p < in_rows);
            data.extend_from_slice(&ta.data()[p * cols..(p + 1) * cols]);
        }
        let out = Tensor::from_vec(&[out_rows, cols], data);
        let in_shape = ta.shape().to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut ga = Tensor::zeros(&in_shape);
                let dst = ga.data_mut();
                for (i, &p) in perm.iter().enumerate() {
                    let p = p as usize;
                    for c in 0..cols {
                        dst[p * cols + c] += g.data()[i * cols + c];
                    }
                }
                sink(a, ga);
            })),
        )
    }

    /// General gather: `out[o] = idx[o] >= 0 ? a[idx[o]] : 0`; backward
    /// scatter-adds.
    pub fn gather(&mut self, a: NodeId, idx: Arc<Vec<i64>>, out_shape: &[usize]) -> NodeId {
        let ta = &self.values[a];
        assert_eq!(idx.len(), out_shape.iter().product::<usize>());
        let data = idx
            .iter()
            .map(|&k| if k >= 0 { ta.data()[k as usize] } else { 0.0 })
            .collect();
        let out = Tensor::from_vec(out_shape, data);
        let in_shape = ta.shape().to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut ga = Tensor::zeros(&in_shape);
                let dst = ga.data_mut();
                for (o, &k) in idx.iter().enumerate() {
                    if k >= 0 {
                        dst[k as usize] += g.data()[o];
                    }
                }
                sink(a, ga);
            })),
        )
    }

    /// Concatenation along axis 0; all parts share trailing dims.
    pub fn concat0(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let trailing: usize = self.values[parts[0]].shape()[1..].iter().product();
        let mut lead = 0usize;
        let mut data = Vec::new();
        let mut spans = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = &self.values[p];
            assert_eq!(t.shape()[1..].iter().product::<usize>(), trailing, "concat trailing dims");
            spans.push((p, t.len()));
            lead += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = self.values[parts[0]].shape().to_vec();
        shape[0] = lead;
        let shapes: Vec<Vec<usize>> =
            parts.iter().map(|&p| self.values[p].shape().to_vec()).collect();
        let out = Tensor::from_vec(&shape, data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut off = 0usize;
                for ((pid, len), shape) in spans.iter().zip(&shapes) {
                    let part = Tensor::from_vec(shape, g.data()[off..off + len].to_vec());
                    off += len;
                    sink(*pid, part);
                }
            })),
        )
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let ta = self.values[a].clone();
        let data = ta.data().iter().map(|&x| gelu_val(x)).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut ga = g.clone();
                for (v, &x) in ga.data_mut().iter_mut().zip(ta.data()) {
                    *v *= gelu_grad(x);
                }
                sink(a, ga);
            })),
        )
    }

    /// LayerNorm over the last dim of `(T, D)` with affine weights.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> NodeId {
        let tx = self.values[x].clone();
        let tg = self.values[gamma].clone();
        let tb = self.values[beta].clone();
        let d = *tx.shape().last().unwrap();
        let rows = tx.len() / d;
        assert_eq!(tg.len(), d);
        assert_eq!(tb.len(), d);
        let mut out = vec![0.0; tx.len()];
        let mut xhat = vec![0.0; tx.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &tx.data()[r * d..(r + 1) * d];
            let mu = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for c in 0..d {
                let h = (row[c] - mu) * inv;
                xhat[r * d + c] = h;
                out[r * d + c] = h * tg.data()[c] + tb.data()[c];
            }
        }
        let xhat = Arc::new(xhat);
        let inv_std = Arc::new(inv_std);
        let shape = tx.shape().to_vec();
        let out = Tensor::from_vec(&shape, out);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut gx = Tensor::zeros(&shape);
                let mut gg = Tensor::zeros(&[d]);
                let mut gb = Tensor::zeros(&[d]);
                {
                    let gxd = gx.data_mut();
                    for r in 0..rows {
                        let grow = &g.data()[r * d..(r + 1) * d];
                        let hrow = &xhat[r * d..(r + 1) * d];
                        let mut mean_gh = 0.0;
                        let mut mean_ghh = 0.0;
                        for c in 0..d {
                            let gh = grow[c] * tg.data()[c];
                            mean_gh += gh;
                            mean_ghh += gh * hrow[c];
                        }
                        mean_gh /= d as f64;
                        mean_ghh /= d as f64;
                        for c in 0..d {
                            let gh = grow[c] * tg.data()[c];
                            gxd[r * d + c] = inv_std[r] * (gh - mean_gh - hrow[c] * mean_ghh);
                        }
                    }
                }
                {
                    let ggd = gg.data_mut();
                    let gbd = gb.data_mut();
                    for r in 0..rows {
                        for c in 0..d {
                            ggd[c] += g.data()[r * d + c] * xhat[r * d + c];
                            gbd[c] += g.data()[r * d + c];
                        }
                    }
                }
                sink(x, gx);
                sink(gamma, gg);
                sink(beta, gb);
            })),
        )
    }

    /// Softmax over the last dim.
    pub fn softmax_last(&mut self, x: NodeId) -> NodeId {
        let tx = &self.values[x];
        let d = *tx.shape().last().unwrap();
        let rows = tx.len() / d;
        let mut out = vec![0.0; tx.len()];
        for r in 0..rows {
            let row = &tx.data()[r * d..(r + 1) * d];
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for c in 0..d {
                let e = (row[c] - mx).exp();
                out[r * d + c] = e;
                total += e;
            }
            for c in 0..d {
                out[r * d + c] /= total;
            }
        }
        let shape = tx.shape().to_vec();
        let out_t = Tensor::from_vec(&shape, out);
        let y = out_t.clone();
        self.push(
            out_t,
            Some(Box::new(move |g, sink| {
                let mut gx = Tensor::zeros(&shape);
                let gxd = gx.data_mut();
                for r in 0..rows {
                    let yrow = &y.data()[r * d..(r + 1) * d];
                    let grow = &g.data()[r * d..(r + 1) * d];
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for c in 0..d {
                        gxd[r * d + c] = yrow[c] * (grow[c] - dot);
                    }
                }
                sink(x, gx);
            })),
        )
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let tx = &self.values[x];
        let total: f64 = tx.data().iter().sum();
        let shape = tx.shape().to_vec();
        self.push(
            Tensor::scalar(total),
            Some(Box::new(move |g, sink| {
                let s = g.item();
                let mut gx = Tensor::zeros(&shape);
                for v in gx.data_mut() {
                    *v = s;
                }
                sink(x, gx);
            })),
        )
    }

    /// Scalar `sum(x * c)` against a constant cotangent.
    pub fn dot_const(&mut self, x: NodeId, c: Tensor) -> NodeId {
        let tx = &self.values[x];
        assert_eq!(tx.len(), c.len());
        let total: f64 = tx.data().iter().zip(c.data()).map(|(a, b)| a * b).sum();
        self.push(
            Tensor::scalar(total),
            Some(Box::new(move |g, sink| {
                let s = g.item();
                let mut gx = c.clone();
                for v in gx.data_mut() {
                    *v *= s;
                }
                sink(x, gx);
            })),
        )
    }

    /// Elementwise square root (inputs must be positive).
    pub fn sqrt(&mut self, x: NodeId) -> NodeId {
        let tx = &self.values[x];
        let data: Vec<f64> = tx.data().iter().map(|&v| v.sqrt()).collect();
        let out = Tensor::from_vec(tx.shape(), data);
        let y = out.clone();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut gx = g.clone();
                for (v, &s) in gx.data_mut().iter_mut().zip(y.data()) {
                    *v *= 0.5 / s.max(1e-300);
                }
                sink(x, gx);
            })),
        )
    }

    /// Per-channel affine with constant coefficients:
    /// `y[c, ...] = a[c] x[c, ...] + b[c]` (normalization layers).
    pub fn channel_affine(&mut self, x: NodeId, a: Arc<Vec<f64>>, b: Arc<Vec<f64>>) -> NodeId {
        let tx = &self.values[x];
        let c = tx.shape()[0];
        assert_eq!(a.len(), c);
        assert_eq!(b.len(), c);
        let per = tx.len() / c;
        let mut data = Vec::with_capacity(tx.len());
        for ch in 0..c {
            for k in 0..per {
                data.push(a[ch] * tx.data()[ch * per + k] + b[ch]);
            }
        }
        let out = Tensor::from_vec(tx.shape(), data);
        let shape = tx.shape().to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut gx = Tensor::zeros(&shape);
                let dst = gx.data_mut();
                for ch in 0..c {
                    for k in 0..per {
                        dst[ch * per + k] = a[ch] * g.data()[ch * per + k];
                    }
                }
                sink(x, gx);
            })),
        )
    }

    /// `(R, C) + broadcast row bias (C)`.
    pub fn bias_rows(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let (tx, tb) = (&self.values[x], &self.values[bias]);
        let c = *tx.shape().last().unwrap();
        assert_eq!(tb.len(), c);
        let rows = tx.len() / c;
        let mut data = Vec::with_capacity(tx.len());
        for r in 0..rows {
            for k in 0..c {
                data.push(tx.data()[r * c + k] + tb.data()[k]);
            }
        }
        let out = Tensor::from_vec(tx.shape(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, g.clone());
                let mut gb = Tensor::zeros(&[c]);
                let dst = gb.data_mut();
                for r in 0..rows {
                    for k in 0..c {
                        dst[k] += g.data()[r * c + k];
                    }
                }
                sink(bias, gb);
            })),
        )
    }

    /// `(C, ...) + per-channel bias (C)`.
    pub fn bias_channels(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let (tx, tb) = (&self.values[x], &self.values[bias]);
        let c = tx.shape()[0];
        assert_eq!(tb.len(), c);
        let per = tx.len() / c;
        let mut data = Vec::with_capacity(tx.len());
        for ch in 0..c {
            for k in 0..per {
                data.push(tx.data()[ch * per + k] + tb.data()[ch]);
            }
        }
        let out = Tensor::from_vec(tx.shape(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, g.clone());
                let mut gb = Tensor::zeros(&[c]);
                let dst = gb.data_mut();
                for ch in 0..c {
                    for k in 0..per {
                        dst[ch] += g.data()[ch * per + k];
                    }
                }
                sink(bias, gb);
            })),
        )
    }

    /// `(B, R, C) + y (B2, R, C)` with `B = B2 * k`; `Mod` maps batch
    /// `i -> i % B2` (per-head tables shared across windows), `Div` maps
    /// `i -> i / (B / B2)` (per-window masks shared across heads).
    pub fn add_bcast3(&mut self, x: NodeId, y: NodeId, mode: Bcast3) -> NodeId {
        let (tx, ty) = (&self.values[x], &self.values[y]);
        let (b, r, c) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
        let b2 = ty.shape()[0];
        assert_eq!(ty.shape()[1..], tx.shape()[1..]);
        assert_eq!(b % b2, 0, "broadcast batch mismatch");
        let k = b / b2;
        let map = move |i: usize| match mode {
            Bcast3::Mod => i % b2,
            Bcast3::Div => i / k,
        };
        let per = r * c;
        let mut data = Vec::with_capacity(tx.len());
        for i in 0..b {
            let src = map(i) * per;
            for t in 0..per {
                data.push(tx.data()[i * per + t] + ty.data()[src + t]);
            }
        }
        let out = Tensor::from_vec(tx.shape(), data);
        let y_shape = ty.shape().to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, g.clone());
                let mut gy = Tensor::zeros(&y_shape);
                let dst = gy.data_mut();
                for i in 0..b {
                    let src = map(i) * per;
                    for t in 0..per {
                        dst[src + t] += g.data()[i * per + t];
                    }
                }
                sink(y, gy);
            })),
        )
    }

    /// Spectral convolution: truncated DFT of the input channels,
    /// per-mode complex channel mixing, Hermitian-weighted inverse,
    /// real output. `x (Cin, ny, nx)`, `w (Cin, Cout, my, mx, 2)`.
    pub fn spectral_conv2d(&mut self, x: NodeId, w: NodeId, basis: Arc<SpectralBasis>) -> NodeId {
        let tx = self.values[x].clone();
        let tw = self.values[w].clone();
        let (cin, ny, nx) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
        assert_eq!(ny, basis.ny);
        assert_eq!(nx, basis.nx);
        let (cin2, cout, my, mx) = (tw.shape()[0], tw.shape()[1], tw.shape()[2], tw.shape()[3]);
        assert_eq!(cin, cin2, "spectral conv channel mismatch");
        assert_eq!(tw.shape()[4], 2);
        assert!(my == basis.my && mx == basis.mx, "mode/basis mismatch");
        let modes = my * mx;

        let (xh_re, xh_im) = basis.forward_real(tx.data(), cin);
        // Mix: yhat[o, m] = sum_c W[c, o, m] xhat[c, m].
        let mut yh_re = vec![0.0; cout * modes];
        let mut yh_im = vec![0.0; cout * modes];
        let wd = tw.data();
        for c in 0..cin {
            let xr = &xh_re[c * modes..(c + 1) * modes];
            let xi = &xh_im[c * modes..(c + 1) * modes];
            for o in 0..cout {
                let wbase = ((c * cout) + o) * modes * 2;
                let yr = &mut yh_re[o * modes..(o + 1) * modes];
                let yi = &mut yh_im[o * modes..(o + 1) * modes];
                for m in 0..modes {
                    let wr = wd[wbase + 2 * m];
                    let wi = wd[wbase + 2 * m + 1];
                    yr[m] += wr * xr[m] - wi * xi[m];
                    yi[m] += wr * xi[m] + wi * xr[m];
                }
            }
        }
        let out_data = basis.inverse_scaled(&yh_re, &yh_im, cout);
        let out = Tensor::from_vec(&[cout, ny, nx], out_data);

        let xh_re = Arc::new(xh_re);
        let xh_im = Arc::new(xh_im);
        let basis_b = basis.clone();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                // ghat = herm . Trunc(F g)
                let (mut gh_re, mut gh_im) = basis_b.forward_real(g.data(), cout);
                for o in 0..cout {
                    for m in 0..modes {
                        gh_re[o * modes + m] *= basis_b.herm()[m];
                        gh_im[o * modes + m] *= basis_b.herm()[m];
                    }
                }
                // grad_W[c,o,m] = ghat[o,m] * conj(xhat[c,m]) as (re, im).
                let mut gw = Tensor::zeros(tw.shape());
                {
                    let dst = gw.data_mut();
                    for c in 0..cin {
                        let xr = &xh_re[c * modes..(c + 1) * modes];
                        let xi = &xh_im[c * modes..(c + 1) * modes];
                        for o in 0..cout {
                            let wbase = ((c * cout) + o) * modes * 2;
                            let gr = &gh_re[o * modes..(o + 1) * modes];
                            let gi = &gh_im[o * modes..(o + 1) * modes];
                            for m in 0..modes {
                                // z = ghat * conj(xhat)
                                dst[wbase + 2 * m] = gr[m] * xr[m] + gi[m] * xi[m];
                                dst[wbase + 2 * m + 1] = gi[m] * xr[m] - gr[m] * xi[m];
                            }
                        }
                    }
                }
                sink(w, gw);
                // grad_x = Re(F^-1 Pad(W^H ghat)) (plain inverse).
                let mut zr = vec![0.0; cin * modes];
                let mut zi = vec![0.0; cin * modes];
                let wd = tw.data();
                for c in 0..cin {
                    let zrr = &mut zr[c * modes..(c + 1) * modes];
                    let zii = &mut zi[c * modes..(c + 1) * modes];
                    for o in 0..cout {
                        let wbase = ((c * cout) + o) * modes * 2;
                        let gr = &gh_re[o * modes..(o + 1) * modes];
                        let gi = &gh_im[o * modes..(o + 1) * modes];
                        for m in 0..modes {
                            let wr = wd[wbase + 2 * m];
                            let wi = wd[wbase + 2 * m + 1];
                            // conj(W) * ghat
                            zrr[m] += wr * gr[m] + wi * gi[m];
                            zii[m] += wr * gi[m] - wi * gr[m];
                        }
                    }
                }
                let gx = basis_b.inverse_plain(&zr, &zi, cin);
                sink(x, Tensor::from_vec(&[cin, ny, nx], gx));
            })),
        )
    }
}

/// Broadcast mapping for [`Graph::add_bcast3`].
#[derive(Clone, Copy, Debug)]
pub enum Bcast3 {
    Mod,
    Div,
}
