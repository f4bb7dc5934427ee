//! Batched subnet kernels over many points at once.
//!
//! Activations of all jet components are stored side by side in one
//! `width × (K·P)` matrix, `K = 1 + 2·axes` (value, first derivatives,
//! second derivatives) and `P` points, so every dense layer is a single
//! matrix product. The backward pass is the hand-derived adjoint of the
//! forward recurrences below; it is checked against the scalar tape and
//! against finite differences in the tests.
//!
//! Forward recurrences for one residual block, per axis `k`:
//!
//! ```text
//! z = W h + b          a = tanh(z.v)      t = 1 − a²
//! h.v   += a
//! h.d1k += t·z.d1k
//! h.d2k += t·z.d2k − 2·a·t·z.d1k²
//! ```

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};

use super::subnet::SubnetConfig;

pub fn n_components(axes: usize) -> usize {
    1 + 2 * axes
}

/// Saved activations of one residual block.
#[derive(Debug, Clone)]
struct Layer {
    input: Array2<f64>,
    z: Array2<f64>,
    a: Array2<f64>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    layers: Vec<Layer>,
    last: Array2<f64>,
}

struct Weights<'a> {
    w_in: ArrayView2<'a, f64>,
    b_in: ArrayView1<'a, f64>,
    blocks: Vec<(ArrayView2<'a, f64>, ArrayView1<'a, f64>)>,
    w_out: ArrayView1<'a, f64>,
    b_out: f64,
}

impl<'a> Weights<'a> {
    fn new(cfg: &SubnetConfig, theta: &'a [f64]) -> Self {
        assert_eq!(theta.len(), cfg.n_params(), "subnet parameter length");
        let (d, h) = (cfg.input_dim, cfg.width);
        let off = cfg.offsets();
        let blocks = (0..cfg.blocks)
            .map(|l| {
                let (w, b) = off.block(cfg, l);
                (
                    ArrayView2::from_shape((h, h), &theta[w..b]).unwrap(),
                    ArrayView1::from(&theta[b..b + h]),
                )
            })
            .collect();
        Self {
            w_in: ArrayView2::from_shape((h, d), &theta[off.w_in..off.b_in]).unwrap(),
            b_in: ArrayView1::from(&theta[off.b_in..off.blocks]),
            blocks,
            w_out: ArrayView1::from(&theta[off.w_out..off.b_out]),
            b_out: theta[off.b_out],
        }
    }
}

struct GradWeights<'a> {
    w_in: ArrayViewMut2<'a, f64>,
    b_in: ArrayViewMut1<'a, f64>,
    blocks: Vec<(ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>)>,
    w_out: ArrayViewMut1<'a, f64>,
    b_out: &'a mut f64,
}

impl<'a> GradWeights<'a> {
    fn new(cfg: &SubnetConfig, grad: &'a mut [f64]) -> Self {
        assert_eq!(grad.len(), cfg.n_params(), "subnet gradient length");
        let (d, h) = (cfg.input_dim, cfg.width);
        let (w_in, rest) = grad.split_at_mut(d * h);
        let (b_in, mut rest) = rest.split_at_mut(h);
        let mut blocks = Vec::with_capacity(cfg.blocks);
        for _ in 0..cfg.blocks {
            let (w, r) = rest.split_at_mut(h * h);
            let (b, r) = r.split_at_mut(h);
            blocks.push((
                ArrayViewMut2::from_shape((h, h), w).unwrap(),
                ArrayViewMut1::from(b),
            ));
            rest = r;
        }
        let (w_out, b_out) = rest.split_at_mut(h);
        Self {
            w_in: ArrayViewMut2::from_shape((h, d), w_in).unwrap(),
            b_in: ArrayViewMut1::from(b_in),
            blocks,
            w_out: ArrayViewMut1::from(w_out),
            b_out: &mut b_out[0],
        }
    }
}

/// First layer: `h.v = W_in ξ + b_in`, `h.d1k = W_in[:,k]·s_k`, `h.d2k = 0`.
fn input_layer(w: &ArrayView2<f64>, b: Option<&ArrayView1<f64>>, xi: &ArrayView2<f64>, scale: &[f64], axes: usize) -> Array2<f64> {
    let (h, p) = (w.nrows(), xi.ncols());
    let mut j = Array2::zeros((h, n_components(axes) * p));
    {
        let mut v = j.slice_mut(s![.., 0..p]);
        general_mat_mul(1.0, w, xi, 0.0, &mut v);
        if let Some(b) = b {
            for (mut row, &bi) in v.rows_mut().into_iter().zip(b.iter()) {
                row += bi;
            }
        }
    }
    for k in 0..axes {
        for i in 0..h {
            let c = w[[i, k]] * scale[k];
            j.slice_mut(s![i, (1 + k) * p..(2 + k) * p]).fill(c);
        }
    }
    j
}

fn affine(w: &ArrayView2<f64>, b: &ArrayView1<f64>, input: &Array2<f64>, p: usize) -> Array2<f64> {
    let mut z = Array2::zeros((w.nrows(), input.ncols()));
    general_mat_mul(1.0, w, input, 0.0, &mut z);
    for (mut row, &bi) in z.rows_mut().into_iter().zip(b.iter()) {
        row.slice_mut(s![0..p]).mapv_inplace(|v| v + bi);
    }
    z
}

/// `w_outᵀ J + b_out` reshaped to `K × P`.
fn output_layer(w_out: &ArrayView1<f64>, b_out: f64, j: &Array2<f64>, k: usize, p: usize) -> Array2<f64> {
    let flat = w_out.dot(j);
    let mut out = flat.into_shape_with_order((k, p)).unwrap();
    out.row_mut(0).mapv_inplace(|v| v + b_out);
    out
}

/// Subnet outputs (`K × P`) for normalized points `xi` (`d × P`).
///
/// `scale[k] = dξ_k/dx_k`; `axes` is the number of spatial axes whose
/// derivatives are propagated (0 for plain values). With `keep` the
/// activations needed by [`backward`] are returned.
pub fn forward(
    cfg: &SubnetConfig,
    theta: &[f64],
    xi: ArrayView2<f64>,
    scale: &[f64],
    axes: usize,
    keep: bool,
) -> (Array2<f64>, Option<Trace>) {
    let wts = Weights::new(cfg, theta);
    let p = xi.ncols();
    let kc = n_components(axes);
    let mut j = input_layer(&wts.w_in, Some(&wts.b_in), &xi, scale, axes);
    let mut layers = Vec::with_capacity(if keep { cfg.blocks } else { 0 });
    for (w, b) in &wts.blocks {
        let z = affine(w, b, &j, p);
        let mut a = Array2::zeros((cfg.width, p));
        for i in 0..cfg.width {
            let zr = z.row(i);
            let zr = zr.as_slice().unwrap();
            let ar = a.row_mut(i).into_slice().unwrap();
            let mut jr = j.row_mut(i);
            let jr = jr.as_slice_mut().unwrap();
            for q in 0..p {
                let av = zr[q].tanh();
                let t = 1.0 - av * av;
                ar[q] = av;
                jr[q] += av;
                for k in 0..axes {
                    let (c1, c2) = ((1 + k) * p + q, (1 + axes + k) * p + q);
                    let z1 = zr[c1];
                    jr[c1] += t * z1;
                    jr[c2] += t * zr[c2] - 2.0 * av * t * z1 * z1;
                }
            }
        }
        if keep {
            // `j` has been updated in place; recover the block input.
            let mut input = j.clone();
            for i in 0..cfg.width {
                let zr = z.row(i);
                let zr = zr.as_slice().unwrap();
                let ar = a.row(i);
                let ar = ar.as_slice().unwrap();
                let mut ir = input.row_mut(i);
                let ir = ir.as_slice_mut().unwrap();
                for q in 0..p {
                    let av = ar[q];
                    let t = 1.0 - av * av;
                    ir[q] -= av;
                    for k in 0..axes {
                        let (c1, c2) = ((1 + k) * p + q, (1 + axes + k) * p + q);
                        let z1 = zr[c1];
                        ir[c1] -= t * z1;
                        ir[c2] -= t * zr[c2] - 2.0 * av * t * z1 * z1;
                    }
                }
            }
            layers.push(Layer { input, z, a });
        }
    }
    let out = output_layer(&wts.w_out, wts.b_out, &j, kc, p);
    let trace = keep.then(|| Trace { layers, last: j });
    (out, trace)
}

/// Accumulates `∂(Σ out_adj ⊙ out)/∂θ` into `grad`.
pub fn backward(
    cfg: &SubnetConfig,
    theta: &[f64],
    trace: &Trace,
    xi: ArrayView2<f64>,
    scale: &[f64],
    axes: usize,
    out_adj: ArrayView2<f64>,
    grad: &mut [f64],
) {
    let wts = Weights::new(cfg, theta);
    let mut g = GradWeights::new(cfg, grad);
    let p = xi.ncols();
    let kc = n_components(axes);
    let o_flat = out_adj
        .to_shape((kc * p,))
        .expect("output adjoint must be K × P")
        .to_owned();

    g.w_out.scaled_add(1.0, &trace.last.dot(&o_flat));
    *g.b_out += out_adj.row(0).sum();

    // J̄ = w_out ⊗ ō
    let mut jbar = Array2::zeros((cfg.width, kc * p));
    for (mut row, &w) in jbar.rows_mut().into_iter().zip(wts.w_out.iter()) {
        row.scaled_add(w, &o_flat);
    }

    for (l, layer) in trace.layers.iter().enumerate().rev() {
        let mut zbar = Array2::zeros((cfg.width, kc * p));
        for i in 0..cfg.width {
            let zr = layer.z.row(i);
            let zr = zr.as_slice().unwrap();
            let ar = layer.a.row(i);
            let ar = ar.as_slice().unwrap();
            let jb = jbar.row(i);
            let jb = jb.as_slice().unwrap();
            let mut zb = zbar.row_mut(i);
            let zb = zb.as_slice_mut().unwrap();
            for q in 0..p {
                let av = ar[q];
                let t = 1.0 - av * av;
                let mut abar = jb[q];
                let mut tbar = 0.0;
                for k in 0..axes {
                    let (c1, c2) = ((1 + k) * p + q, (1 + axes + k) * p + q);
                    let (z1, z2) = (zr[c1], zr[c2]);
                    let (a1, a2) = (jb[c1], jb[c2]);
                    tbar += a1 * z1 + a2 * (z2 - 2.0 * av * z1 * z1);
                    zb[c1] = a1 * t - 4.0 * av * t * z1 * a2;
                    zb[c2] = a2 * t;
                    abar -= 2.0 * t * z1 * z1 * a2;
                }
                abar -= 2.0 * av * tbar;
                zb[q] = abar * t;
            }
        }
        let (w, _) = &wts.blocks[l];
        let (gw, gb) = &mut g.blocks[l];
        general_mat_mul(1.0, &zbar, &layer.input.t(), 1.0, gw);
        for (gbi, row) in gb.iter_mut().zip(zbar.rows()) {
            *gbi += row.slice(s![0..p]).sum();
        }
        general_mat_mul(1.0, &w.t(), &zbar, 1.0, &mut jbar);
    }

    let hv = jbar.slice(s![.., 0..p]);
    general_mat_mul(1.0, &hv, &xi.t(), 1.0, &mut g.w_in);
    for (gbi, row) in g.b_in.iter_mut().zip(hv.rows()) {
        *gbi += row.sum();
    }
    for k in 0..axes {
        let d1 = jbar.slice(s![.., (1 + k) * p..(2 + k) * p]);
        for (i, row) in d1.rows().into_iter().enumerate() {
            g.w_in[[i, k]] += scale[k] * row.sum();
        }
    }
}

/// Outputs and their directional derivative along `dtheta`, both `K × P`.
pub fn jvp(
    cfg: &SubnetConfig,
    theta: &[f64],
    dtheta: &[f64],
    xi: ArrayView2<f64>,
    scale: &[f64],
    axes: usize,
) -> (Array2<f64>, Array2<f64>) {
    let wts = Weights::new(cfg, theta);
    let dw = Weights::new(cfg, dtheta);
    let p = xi.ncols();
    let kc = n_components(axes);
    let mut j = input_layer(&wts.w_in, Some(&wts.b_in), &xi, scale, axes);
    let mut jd = input_layer(&dw.w_in, Some(&dw.b_in), &xi, scale, axes);
    for ((w, b), (wd, bd)) in wts.blocks.iter().zip(&dw.blocks) {
        let z = affine(w, b, &j, p);
        let mut zd = affine(wd, bd, &j, p);
        general_mat_mul(1.0, w, &jd, 1.0, &mut zd);
        for i in 0..cfg.width {
            let zr = z.row(i);
            let zr = zr.as_slice().unwrap();
            let zdr = zd.row(i);
            let zdr = zdr.as_slice().unwrap();
            let mut jr = j.row_mut(i);
            let jr = jr.as_slice_mut().unwrap();
            let mut jdr = jd.row_mut(i);
            let jdr = jdr.as_slice_mut().unwrap();
            for q in 0..p {
                let av = zr[q].tanh();
                let t = 1.0 - av * av;
                let ad = t * zdr[q];
                let td = -2.0 * av * ad;
                jr[q] += av;
                jdr[q] += ad;
                for k in 0..axes {
                    let (c1, c2) = ((1 + k) * p + q, (1 + axes + k) * p + q);
                    let (z1, z2, z1d, z2d) = (zr[c1], zr[c2], zdr[c1], zdr[c2]);
                    jr[c1] += t * z1;
                    jdr[c1] += td * z1 + t * z1d;
                    jr[c2] += t * z2 - 2.0 * av * t * z1 * z1;
                    jdr[c2] += td * z2 + t * z2d
                        - 2.0 * (ad * t * z1 * z1 + av * td * z1 * z1 + 2.0 * av * t * z1 * z1d);
                }
            }
        }
    }
    let out = output_layer(&wts.w_out, wts.b_out, &j, kc, p);
    let mut dout = output_layer(&wts.w_out, 0.0, &jd, kc, p);
    dout += &output_layer(&dw.w_out, dw.b_out, &j, kc, p);
    (out, dout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad, Jet2, Scalar};
    use crate::model::{init_params, subnet_forward_jet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(d: usize, seed: u64) -> (SubnetConfig, Vec<f64>, Array2<f64>, Vec<f64>) {
        let cfg = SubnetConfig::new(d, 5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = init_params(&cfg, &mut rng);
        for v in theta.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let p = 7;
        let xi = Array2::from_shape_fn((d, p), |_| rng.random_range(-1.0..1.0));
        let scale: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..4.0)).collect();
        (cfg, theta, xi, scale)
    }

    fn xi_jets<T: Scalar>(xi: &Array2<f64>, scale: &[f64], q: usize) -> Vec<Jet2<T>> {
        (0..xi.nrows())
            .map(|k| {
                let mut s = Jet2::constant(xi[[k, q]]);
                s.d1[k] = scale[k];
                s.lift()
            })
            .collect()
    }

    #[test]
    fn forward_matches_scalar_jets() {
        for d in [1, 2] {
            let (cfg, theta, xi, scale) = setup(d, 4 + d as u64);
            let (out, _) = forward(&cfg, &theta, xi.view(), &scale, d, false);
            for q in 0..xi.ncols() {
                let j = subnet_forward_jet(&cfg, &theta, &xi_jets::<f64>(&xi, &scale, q)).unwrap();
                assert!((out[[0, q]] - j.v).abs() < 1e-13);
                for k in 0..d {
                    assert!((out[[1 + k, q]] - j.d1[k]).abs() < 1e-12);
                    assert!((out[[1 + d + k, q]] - j.d2[k]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn value_only_forward_matches_first_component() {
        let (cfg, theta, xi, scale) = setup(2, 1);
        let (full, _) = forward(&cfg, &theta, xi.view(), &scale, 2, false);
        let (plain, _) = forward(&cfg, &theta, xi.view(), &scale, 0, false);
        for q in 0..xi.ncols() {
            assert!((full[[0, q]] - plain[[0, q]]).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_matches_tape() {
        for d in [1, 2] {
            let (cfg, theta, xi, scale) = setup(d, 20 + d as u64);
            let kc = n_components(d);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let adj = Array2::from_shape_fn((kc, xi.ncols()), |_| rng.random_range(-1.0..1.0));
            let (_, trace) = forward(&cfg, &theta, xi.view(), &scale, d, true);
            let mut g = vec![0.0; cfg.n_params()];
            backward(&cfg, &theta, trace.as_ref().unwrap(), xi.view(), &scale, d, adj.view(), &mut g);

            let (_, tape_g) = grad(
                |th| {
                    let mut acc = crate::autodiff::Var::cst(0.0);
                    for q in 0..xi.ncols() {
                        let j = subnet_forward_jet(&cfg, th, &xi_jets(&xi, &scale, q)).unwrap();
                        acc = acc + j.v.scale(adj[[0, q]]);
                        for k in 0..d {
                            acc = acc + j.d1[k].scale(adj[[1 + k, q]]) + j.d2[k].scale(adj[[1 + d + k, q]]);
                        }
                    }
                    acc
                },
                &theta,
            )
            .unwrap();
            for (a, b) in g.iter().zip(&tape_g) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn jvp_matches_gradient_contraction() {
        for d in [1, 2] {
            let (cfg, theta, xi, scale) = setup(d, 40 + d as u64);
            let kc = n_components(d);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let dir: Vec<f64> = (0..cfg.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let adj = Array2::from_shape_fn((kc, xi.ncols()), |_| rng.random_range(-1.0..1.0));
            let (out, dout) = jvp(&cfg, &theta, &dir, xi.view(), &scale, d);
            let (out2, trace) = forward(&cfg, &theta, xi.view(), &scale, d, true);
            assert!((&out - &out2).iter().all(|v| v.abs() < 1e-13));
            let mut g = vec![0.0; cfg.n_params()];
            backward(&cfg, &theta, trace.as_ref().unwrap(), xi.view(), &scale, d, adj.view(), &mut g);
            let lhs: f64 = (&dout * &adj).sum();
            let rhs: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }
}
