use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::gradcheck::grad_check;
use crate::graph::{Bcast3, Graph, NodeId};
use crate::spectral::SpectralBasis;
use crate::tensor::Tensor;

fn rand_tensor(shape: &[usize], rng: &mut ChaCha12Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Runs both the analytic backward pass and a finite-difference check
/// for an op under a fixed random cotangent; asserts max rel error.
fn check_op(
    build: impl Fn(&mut Graph, &[NodeId]) -> NodeId,
    param_shapes: &[&[usize]],
    eps: f64,
    tol: f64,
    seed: u64,
) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let params: Vec<Tensor> = param_shapes.iter().map(|s| rand_tensor(s, &mut rng)).collect();
    // Fixed cotangent for the scalar loss.
    let mut g = Graph::new();
    let ids: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone())).collect();
    let out = build(&mut g, &ids);
    let cot = rand_tensor(g.value(out).shape(), &mut rng);
    let loss_id = g.dot_const(out, cot.clone());
    g.backward(loss_id, 1.0);
    let analytic: Vec<Tensor> = ids
        .iter()
        .map(|&id| g.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(g.value(id).shape())))
        .collect();

    let mut loss = |ps: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ps.iter().map(|t| g.leaf(t.clone())).collect();
        let out = build(&mut g, &ids);
        let loss_id = g.dot_const(out, cot.clone());
        g.value(loss_id).item()
    };
    let report = grad_check(&params, &analytic, &mut loss, eps, 64, seed ^ 0xABCD);
    assert!(
        report.max_rel_error < tol,
        "gradient check failed: {} (checked {})",
        report.max_rel_error,
        report.coords_checked
    );
}

#[test]
fn grad_add_sub_mul_scale() {
    check_op(|g, p| g.add(p[0], p[1]), &[&[3, 4], &[3, 4]], 1e-4, 1e-9, 1);
    check_op(|g, p| g.sub(p[0], p[1]), &[&[3, 4], &[3, 4]], 1e-4, 1e-9, 2);
    check_op(|g, p| g.mul(p[0], p[1]), &[&[5, 2], &[5, 2]], 1e-5, 1e-8, 3);
    check_op(|g, p| g.scale(p[0], -1.7), &[&[7]], 1e-4, 1e-9, 4);
}

#[test]
fn grad_matmul_is_exact_for_linear_maps() {
    check_op(|g, p| g.matmul(p[0], p[1]), &[&[4, 3], &[3, 5]], 1e-5, 1e-8, 5);
    check_op(|g, p| g.bmm(p[0], p[1]), &[&[2, 3, 4], &[2, 4, 2]], 1e-5, 1e-8, 6);
}

#[test]
fn grad_transpose_reshape_swap() {
    check_op(|g, p| g.transpose_last2(p[0]), &[&[2, 3, 4]], 1e-4, 1e-9, 7);
    check_op(|g, p| g.reshape(p[0], &[6, 2]), &[&[3, 4]], 1e-4, 1e-9, 8);
    check_op(|g, p| g.swap_mid(p[0], (2, 3, 4, 5)), &[&[2, 3, 4, 5]], 1e-4, 1e-9, 9);
}

#[test]
fn grad_permute_and_gather() {
    let perm = Arc::new(vec![3u32, 0, 0, 2, 1]);
    check_op(move |g, p| g.permute_rows(p[0], perm.clone(), 3), &[&[4, 3]], 1e-4, 1e-9, 10);
    let idx = Arc::new(vec![5i64, -1, 0, 0, 7, 2]);
    check_op(move |g, p| g.gather(p[0], idx.clone(), &[6]), &[&[8]], 1e-4, 1e-9, 11);
}

#[test]
fn grad_concat() {
    check_op(
        |g, p| g.concat0(&[p[0], p[1], p[2]]),
        &[&[1, 4], &[2, 4], &[1, 4]],
        1e-4,
        1e-9,
        12,
    );
}

#[test]
fn grad_gelu_smooth_region() {
    // Inputs bounded away from zero curvature extremes.
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let vals: Vec<f64> = (0..24)
        .map(|_| {
            let v: f64 = rng.gen_range(0.1..2.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Tensor::from_vec(&[24], vals);
    let mut g = Graph::new();
    let xid = g.leaf(x.clone());
    let out = g.gelu(xid);
    let cot = rand_tensor(&[24], &mut rng);
    let loss = g.dot_const(out, cot.clone());
    g.backward(loss, 1.0);
    let analytic = vec![g.grad(xid).cloned().unwrap()];
    let mut f = |ps: &[Tensor]| {
        let mut g = Graph::new();
        let id = g.leaf(ps[0].clone());
        let o = g.gelu(id);
        let l = g.dot_const(o, cot.clone());
        g.value(l).item()
    };
    let rep = grad_check(&[x], &analytic, &mut f, 1e-6, 64, 14);
    assert!(rep.max_rel_error < 1e-6, "gelu grad err {}", rep.max_rel_error);
}

#[test]
fn grad_layer_norm_softmax() {
    check_op(|g, p| g.layer_norm(p[0], p[1], p[2], 1e-5), &[&[6, 5], &[5], &[5]], 1e-6, 1e-6, 15);
    check_op(|g, p| g.softmax_last(p[0]), &[&[4, 7]], 1e-6, 1e-6, 16);
}

#[test]
fn grad_reductions_and_sqrt() {
    check_op(|g, p| g.sum_all(p[0]), &[&[9]], 1e-4, 1e-9, 17);
    // sqrt over positive inputs
    let mut rng = ChaCha12Rng::seed_from_u64(18);
    let x = Tensor::from_vec(&[12], (0..12).map(|_| rng.gen_range(0.5..3.0)).collect());
    let mut g = Graph::new();
    let id = g.leaf(x.clone());
    let out = g.sqrt(id);
    let cot = rand_tensor(&[12], &mut rng);
    let loss = g.dot_const(out, cot.clone());
    g.backward(loss, 1.0);
    let analytic = vec![g.grad(id).cloned().unwrap()];
    let mut f = |ps: &[Tensor]| {
        let mut g = Graph::new();
        let id = g.leaf(ps[0].clone());
        let o = g.sqrt(id);
        let l = g.dot_const(o, cot.clone());
        g.value(l).item()
    };
    let rep = grad_check(&[x], &analytic, &mut f, 1e-6, 64, 19);
    assert!(rep.max_rel_error < 1e-7, "sqrt grad err {}", rep.max_rel_error);
}

#[test]
fn grad_bias_and_broadcast() {
    check_op(|g, p| g.bias_rows(p[0], p[1]), &[&[5, 3], &[3]], 1e-4, 1e-9, 20);
    check_op(|g, p| g.bias_channels(p[0], p[1]), &[&[3, 2, 2], &[3]], 1e-4, 1e-9, 21);
    check_op(
        |g, p| g.add_bcast3(p[0], p[1], Bcast3::Mod),
        &[&[6, 2, 3], &[2, 2, 3]],
        1e-4,
        1e-9,
        22,
    );
    check_op(
        |g, p| g.add_bcast3(p[0], p[1], Bcast3::Div),
        &[&[6, 2, 3], &[3, 2, 3]],
        1e-4,
        1e-9,
        23,
    );
}

#[test]
fn grad_channel_affine() {
    let a = Arc::new(vec![1.5, -0.3]);
    let b = Arc::new(vec![0.2, 1.0]);
    check_op(
        move |g, p| g.channel_affine(p[0], a.clone(), b.clone()),
        &[&[2, 3, 3]],
        1e-4,
        1e-9,
        24,
    );
}

#[test]
fn grad_spectral_conv() {
    let basis = SpectralBasis::new(8, 8, 4, 3);
    check_op(
        move |g, p| g.spectral_conv2d(p[0], p[1], basis.clone()),
        &[&[2, 8, 8], &[2, 3, 4, 3, 2]],
        1e-5,
        1e-7,
        25,
    );
}

#[test]
fn spectral_conv_zero_input_gives_zero() {
    let basis = SpectralBasis::new(8, 8, 4, 3);
    let mut g = Graph::new();
    let x = g.leaf(Tensor::zeros(&[1, 8, 8]));
    let mut rng = ChaCha12Rng::seed_from_u64(30);
    let w = g.leaf(rand_tensor(&[1, 1, 4, 3, 2], &mut rng));
    let y = g.spectral_conv2d(x, w, basis);
    assert!(g.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn spectral_conv_identity_weights_on_bandlimited_input() {
    // W = identity channel mix on every kept mode acts as the identity
    // on band-limited input.
    let (ny, nx, my, mx) = (8usize, 8usize, 4usize, 3usize);
    let basis = SpectralBasis::new(ny, nx, my, mx);
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    let raw: Vec<f64> = (0..ny * nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let band = basis.project(&raw, 1);

    let mut w = Tensor::zeros(&[1, 1, my, mx, 2]);
    for m in 0..my * mx {
        w.data_mut()[2 * m] = 1.0; // real part 1, imag 0
    }
    let mut g = Graph::new();
    let x = g.leaf(Tensor::from_vec(&[1, ny, nx], band.clone()));
    let wid = g.leaf(w);
    let y = g.spectral_conv2d(x, wid, basis);
    let max_err = g
        .value(y)
        .data()
        .iter()
        .zip(&band)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(max_err < 1e-10, "identity mix should preserve band-limited input: {max_err}");
}

#[test]
fn spectral_conv_ignores_discarded_modes() {
    // conv(x) == conv(P x): energy outside the kept band cannot affect
    // the output.
    let (ny, nx, my, mx) = (8usize, 8usize, 4usize, 3usize);
    let basis = SpectralBasis::new(ny, nx, my, mx);
    let mut rng = ChaCha12Rng::seed_from_u64(32);
    let raw: Vec<f64> = (0..2 * ny * nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let proj = basis.project(&raw, 2);
    let w = rand_tensor(&[2, 2, my, mx, 2], &mut rng);

    let run = |input: Vec<f64>| -> Tensor {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(&[2, ny, nx], input));
        let wid = g.leaf(w.clone());
        let y = g.spectral_conv2d(x, wid, basis.clone());
        g.value(y).clone()
    };
    let a = run(raw);
    let b = run(proj);
    let max_err = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(max_err < 1e-10, "discarded modes leaked into the output: {max_err}");
}

#[test]
fn spectral_conv_matches_dense_dft_oracle() {
    // Dense oracle: full unitary DFT matrix multiply, mode mask + mixing,
    // Hermitian completion of dropped mirrors, inverse, real part.
    use scatter_fields::{dft2_forward, dft2_inverse, Complex64, ComplexField2D, Grid2D};

    let (ny, nx, my, mx) = (8usize, 8usize, 4usize, 3usize);
    let basis = SpectralBasis::new(ny, nx, my, mx);
    let mut rng = ChaCha12Rng::seed_from_u64(33);
    let xvals: Vec<f64> = (0..ny * nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = rand_tensor(&[1, 1, my, mx, 2], &mut rng);

    // Engine path.
    let mut g = Graph::new();
    let x = g.leaf(Tensor::from_vec(&[1, ny, nx], xvals.clone()));
    let wid = g.leaf(w.clone());
    let y = g.spectral_conv2d(x, wid, basis);
    let engine = g.value(y).clone();

    // Oracle path.
    let grid = Grid2D::new(nx, ny, 1.0, 1.0).unwrap();
    let field = ComplexField2D::from_values(
        grid,
        xvals.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    )
    .unwrap();
    let coeffs = dft2_forward(&field);
    let mut masked = vec![Complex64::default(); ny * nx];
    let freqs = crate::spectral::signed_y_freqs(my);
    for (m, &fy) in freqs.iter().enumerate() {
        let ky = if fy >= 0 { fy as usize } else { (ny as isize + fy) as usize };
        for kx in 0..mx {
            let wc = Complex64::new(w.data()[(m * mx + kx) * 2], w.data()[(m * mx + kx) * 2 + 1]);
            let mixed = wc * coeffs.at(kx, ky);
            masked[ky * nx + kx] = mixed;
            // Hermitian completion when the mirror was dropped.
            let mky = (ny - ky) % ny;
            let mkx = (nx - kx) % nx;
            let mirror_kept = kx == 0 && freqs.contains(&(-fy));
            if !mirror_kept {
                masked[mky * nx + mkx] = mixed.conj();
            }
        }
    }
    let mut oracle_coeffs = dft2_forward(&ComplexField2D::zeros(grid));
    oracle_coeffs.data_mut().copy_from_slice(&masked);
    let oracle_field = dft2_inverse(&oracle_coeffs);

    let max_err = engine
        .data()
        .iter()
        .zip(oracle_field.values())
        .map(|(a, b)| (a - b.re).abs())
        .fold(0.0, f64::max);
    assert!(max_err < 1e-12, "engine vs dense oracle: {max_err}");
}

#[test]
fn backward_accumulates_through_shared_nodes() {
    // f = sum(x * x) with x reused: grad must be 2x.
    let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 3.0]);
    let mut g = Graph::new();
    let id = g.leaf(x.clone());
    let sq = g.mul(id, id);
    let loss = g.sum_all(sq);
    g.backward(loss, 1.0);
    let grad = g.grad(id).unwrap();
    for (gv, xv) in grad.data().iter().zip(x.data()) {
        assert!((gv - 2.0 * xv).abs() < 1e-14);
    }
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha12Rng::seed_from_u64(40);
    let basis = SpectralBasis::new(8, 8, 4, 4);
    let x = rand_tensor(&[3, 8, 8], &mut rng);
    let w = rand_tensor(&[3, 3, 4, 4, 2], &mut rng);
    let run = || {
        let mut g = Graph::new();
        let a = g.leaf(x.clone());
        let b = g.leaf(w.clone());
        let y = g.spectral_conv2d(a, b, basis.clone());
        let l = g.sum_all(y);
        g.backward(l, 1.0);
        (g.value(y).clone(), g.grad(a).cloned().unwrap(), g.grad(b).cloned().unwrap())
    };
    let (y1, ga1, gb1) = run();
    let (y2, ga2, gb2) = run();
    assert_eq!(y1.data(), y2.data());
    assert_eq!(ga1.data(), ga2.data());
    assert_eq!(gb1.data(), gb2.data());
}
