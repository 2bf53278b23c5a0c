use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{Activation, LayerSpec, ModelSpec, RECEPTIVE_FIELD};
use super::tensor::Tensor;
use crate::error::{Error, Result};


/// Floating-point type the engine can run in.
pub trait Scalar: Float + FromPrimitive + Default + Send + Sync + Debug + 'static {
    /// `C ← op(A)·op(B) + β·C` with row-major storage; `op(A)` is `m × k`, `op(B)` is `k × n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_t: bool, b: &[Self], b_t: bool, c: &mut [Self], beta: Self);

    fn of_f32(v: f32) -> Self;
    fn into_f32(self) -> f32;
}

#[allow(clippy::too_many_arguments)]
fn strides(m: usize, k: usize, n: usize, a_t: bool, b_t: bool) -> (isize, isize, isize, isize) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    (rsa, csa, rsb, csb)
}

fn check_gemm(m: usize, k: usize, n: usize, a: usize, b: usize, c: usize) {
    assert!(a >= m * k && b >= k * n && c >= m * n, "gemm operand too small");
}

impl Scalar for f32 {
    fn gemm(m: usize, k: usize, n: usize, a: &[f32], a_t: bool, b: &[f32], b_t: bool, c: &mut [f32], beta: f32) {
        check_gemm(m, k, n, a.len(), b.len(), c.len());
        let (rsa, csa, rsb, csb) = strides(m, k, n, a_t, b_t);
        // SAFETY: operand extents checked above; strides stay inside them.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }

    fn of_f32(v: f32) -> Self {
        v
    }

    fn into_f32(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
        check_gemm(m, k, n, a.len(), b.len(), c.len());
        let (rsa, csa, rsb, csb) = strides(m, k, n, a_t, b_t);
        // SAFETY: operand extents checked above; strides stay inside them.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }

    fn of_f32(v: f32) -> Self {
        v as f64
    }

    fn into_f32(self) -> f32 {
        self as f32
    }
}

pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub(crate) fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Activation {
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Softplus => softplus(x),
            Activation::Identity => x,
        }
    }

    fn derivative<S: Scalar>(self, pre: S) -> S {
        match self {
            Activation::Relu => {
                if pre > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Softplus => sigmoid(pre),
            Activation::Identity => S::one(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Op {
    Conv {
        layer: usize,
        cin: usize,
        cout: usize,
        k: usize,
        s: usize,
        act: Activation,
    },
    Pool {
        k: usize,
        s: usize,
    },
}

pub(crate) fn ops(spec: &ModelSpec) -> Vec<Op> {
    let mut out = Vec::new();
    let mut layer = 0;
    let mut c = spec.in_channels();
    for l in spec.conv_stack() {
        match *l {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                activation,
                ..
            } => {
                out.push(Op::Conv {
                    layer,
                    cin: c,
                    cout: out_channels,
                    k: kernel,
                    s: stride,
                    act: activation,
                });
                layer += 1;
                c = out_channels;
            }
            LayerSpec::MaxPool { kernel, stride } => out.push(Op::Pool { k: kernel, s: stride }),
        }
    }
    for h in spec.head() {
        out.push(Op::Conv {
            layer,
            cin: c,
            cout: h.out_channels,
            k: 1,
            s: 1,
            act: h.activation,
        });
        layer += 1;
        c = h.out_channels;
    }
    out
}

/// Channel-major feature map.
#[derive(Debug, Clone)]
pub(crate) struct Map<S> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Map<S> {
    /// From an `[H, W, C]` tensor.
    pub fn from_hwc(t: &Tensor) -> Result<Self> {
        if t.shape.len() != 3 {
            return Err(Error::invalid(format!("expected [H, W, C] input, got {:?}", t.shape)));
        }
        let (h, w, c) = (t.shape[0], t.shape[1], t.shape[2]);
        let mut data = vec![S::zero(); c * h * w];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data[(ch * h + y) * w + x] = S::of_f32(t.data[(y * w + x) * c + ch]);
                }
            }
        }
        Ok(Self { c, h, w, data })
    }

    /// From interleaved 8-bit RGB.
    pub fn from_rgb8(h: usize, w: usize, bytes: &[u8]) -> Self {
        let scale = S::from_f64(1.0 / 255.0).unwrap();
        let mut data = vec![S::zero(); 3 * h * w];
        for (i, px) in bytes.chunks_exact(3).enumerate() {
            for ch in 0..3 {
                data[ch * h * w + i] = S::from_u8(px[ch]).unwrap() * scale;
            }
        }
        Self { c: 3, h, w, data }
    }
}

/// Borrowed weights of one layer: `[cout, cin, k, k]` and `[cout]`.
pub(crate) type LayerRef<'a, S> = (&'a [S], &'a [S]);

pub(crate) enum Saved<S> {
    Conv {
        cols: Vec<S>,
        in_dims: (usize, usize, usize),
        pre: Vec<S>,
    },
    Pool {
        in_dims: (usize, usize, usize),
        argmax: Vec<u32>,
    },
}

fn im2col<S: Scalar>(x: &Map<S>, k: usize, s: usize, ho: usize, wo: usize) -> Vec<S> {
    if k == 1 && s == 1 {
        return x.data.clone();
    }
    let p = ho * wo;
    let mut cols = vec![S::zero(); x.c * k * k * p];
    for ci in 0..x.c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let src = &x.data[(ci * x.h + oy * s + ki) * x.w + kj..];
                    let d = &mut dst[oy * wo..(oy + 1) * wo];
                    if s == 1 {
                        d.copy_from_slice(&src[..wo]);
                    } else {
                        for (ox, v) in d.iter_mut().enumerate() {
                            *v = src[ox * s];
                        }
                    }
                }
            }
        }
    }
    cols
}

#[allow(clippy::too_many_arguments)]
fn col2im<S: Scalar>(cols: &[S], dims: (usize, usize, usize), k: usize, s: usize, ho: usize, wo: usize) -> Vec<S> {
    let (c, h, w) = dims;
    if k == 1 && s == 1 {
        return cols.to_vec();
    }
    let p = ho * wo;
    let mut out = vec![S::zero(); c * h * w];
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let base = (ci * h + oy * s + ki) * w + kj;
                    for ox in 0..wo {
                        out[base + ox * s] = out[base + ox * s] + src[oy * wo + ox];
                    }
                }
            }
        }
    }
    out
}

fn out_size(n: usize, k: usize, s: usize) -> Result<usize> {
    if n < k {
        return Err(Error::invalid(format!("feature map of size {n} is smaller than kernel {k}")));
    }
    Ok((n - k) / s + 1)
}

/// Runs the network; returns logits `[n_bins, rows·cols]` and, if asked, the backward cache.
pub(crate) fn forward<S: Scalar>(
    ops: &[Op],
    weights: &[LayerRef<'_, S>],
    input: Map<S>,
    keep: bool,
) -> Result<(Map<S>, Vec<Saved<S>>)> {
    let mut x = input;
    let mut saved = Vec::new();
    for op in ops {
        match *op {
            Op::Conv {
                layer,
                cin,
                cout,
                k,
                s,
                act,
            } => {
                if x.c != cin {
                    return Err(Error::invalid(format!("layer expects {cin} channels, got {}", x.c)));
                }
                let (ho, wo) = (out_size(x.h, k, s)?, out_size(x.w, k, s)?);
                let p = ho * wo;
                let cols = im2col(&x, k, s, ho, wo);
                let (wt, b) = weights[layer];
                let mut pre = vec![S::zero(); cout * p];
                for (o, row) in pre.chunks_exact_mut(p).enumerate() {
                    row.fill(b[o]);
                }
                S::gemm(cout, cin * k * k, p, wt, false, &cols, false, &mut pre, S::one());
                let data = if act == Activation::Identity {
                    pre.clone()
                } else {
                    pre.iter().map(|v| act.apply(*v)).collect()
                };
                if keep {
                    saved.push(Saved::Conv {
                        cols,
                        in_dims: (x.c, x.h, x.w),
                        pre,
                    });
                }
                x = Map {
                    c: cout,
                    h: ho,
                    w: wo,
                    data,
                };
            }
            Op::Pool { k, s } => {
                let (ho, wo) = (out_size(x.h, k, s)?, out_size(x.w, k, s)?);
                let mut data = vec![S::zero(); x.c * ho * wo];
                let mut argmax = if keep { vec![0u32; data.len()] } else { Vec::new() };
                for ci in 0..x.c {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut best = S::neg_infinity();
                            let mut at = 0;
                            for ki in 0..k {
                                let row = (ci * x.h + oy * s + ki) * x.w + ox * s;
                                for kj in 0..k {
                                    let v = x.data[row + kj];
                                    if v > best {
                                        best = v;
                                        at = row + kj;
                                    }
                                }
                            }
                            let o = (ci * ho + oy) * wo + ox;
                            data[o] = best;
                            if keep {
                                argmax[o] = at as u32;
                            }
                        }
                    }
                }
                if keep {
                    saved.push(Saved::Pool {
                        in_dims: (x.c, x.h, x.w),
                        argmax,
                    });
                }
                x = Map {
                    c: x.c,
                    h: ho,
                    w: wo,
                    data,
                };
            }
        }
    }
    Ok((x, saved))
}

/// Accumulates parameter gradients given `d_out = ∂L/∂logits`.
pub(crate) fn backward<S: Scalar>(
    ops: &[Op],
    weights: &[LayerRef<'_, S>],
    saved: Vec<Saved<S>>,
    d_out: Vec<S>,
    grads: &mut [(Vec<S>, Vec<S>)],
) {
    let mut d = d_out;
    for (i, (op, cache)) in ops.iter().zip(saved).enumerate().rev() {
        match (*op, cache) {
            (
                Op::Conv {
                    layer,
                    cin,
                    cout,
                    k,
                    s,
                    act,
                },
                Saved::Conv { cols, in_dims, pre },
            ) => {
                let p = pre.len() / cout;
                if act != Activation::Identity {
                    for (g, z) in d.iter_mut().zip(&pre) {
                        *g = *g * act.derivative(*z);
                    }
                }
                let ckk = cin * k * k;
                let (gw, gb) = &mut grads[layer];
                for (o, row) in d.chunks_exact(p).enumerate() {
                    gb[o] = gb[o] + row.iter().fold(S::zero(), |a, v| a + *v);
                }
                S::gemm(cout, p, ckk, &d, false, &cols, true, gw, S::one());
                if i == 0 {
                    return;
                }
                let mut dcols = vec![S::zero(); ckk * p];
                S::gemm(ckk, cout, p, weights[layer].0, true, &d, false, &mut dcols, S::zero());
                let (ho, wo) = (out_size(in_dims.1, k, s).unwrap(), out_size(in_dims.2, k, s).unwrap());
                d = col2im(&dcols, in_dims, k, s, ho, wo);
            }
            (Op::Pool { .. }, Saved::Pool { in_dims, argmax }) => {
                let mut dx = vec![S::zero(); in_dims.0 * in_dims.1 * in_dims.2];
                for (g, at) in d.iter().zip(&argmax) {
                    dx[*at as usize] = dx[*at as usize] + *g;
                }
                d = dx;
            }
            _ => unreachable!("cache does not match layer"),
        }
    }
}

/// Weights and bias of one weighted layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Trained or initialised planner parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub(crate) spec: ModelSpec,
    pub(crate) layers: Vec<LayerParams>,
    pub(crate) seed: u64,
}

impl ModelParams {
    pub fn from_parts(spec: ModelSpec, layers: Vec<LayerParams>, seed: u64) -> Result<Self> {
        let shapes = spec.weighted_layers();
        if shapes.len() != layers.len() {
            return Err(Error::invalid(format!(
                "architecture has {} weighted layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for ((cin, cout, k, _, _), l) in shapes.iter().zip(&layers) {
            if l.weight.shape != [*cout, *cin, *k, *k] || l.bias.shape != [*cout] {
                return Err(Error::invalid(format!(
                    "layer shape {:?}/{:?} does not match [{cout}, {cin}, {k}, {k}]",
                    l.weight.shape, l.bias.shape
                )));
            }
        }
        Ok(Self { spec, layers, seed })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_bins(&self) -> usize {
        self.spec.n_bins()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    pub(crate) fn refs(&self) -> Vec<LayerRef<'_, f32>> {
        self.layers
            .iter()
            .map(|l| (&l.weight.data[..], &l.bias.data[..]))
            .collect()
    }

    pub(crate) fn to_scalar<S: Scalar>(&self) -> Vec<(Vec<S>, Vec<S>)> {
        self.layers
            .iter()
            .map(|l| {
                (
                    l.weight.data.iter().map(|v| S::of_f32(*v)).collect(),
                    l.bias.data.iter().map(|v| S::of_f32(*v)).collect(),
                )
            })
            .collect()
    }
}

pub const INIT_STD: f64 = 0.05;

/// Weights from a normal with std [`INIT_STD`] truncated at two deviations;
/// zero biases.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let layers = spec
        .weighted_layers()
        .into_iter()
        .map(|(cin, cout, k, _, _)| {
            let n = cout * cin * k * k;
            let data = (0..n)
                .map(|_| loop {
                    let v: f64 = normal.sample(&mut rng);
                    if v.abs() <= 2.0 * INIT_STD {
                        break v as f32;
                    }
                })
                .collect();
            LayerParams {
                weight: Tensor {
                    shape: vec![cout, cin, k, k],
                    data,
                },
                bias: Tensor::zeros(vec![cout]),
            }
        })
        .collect();
    ModelParams {
        spec: spec.clone(),
        layers,
        seed,
    }
}

/// Grasp-success probability per angle bin for one `[227, 227, 3]` patch.
pub fn forward_patch(params: &ModelParams, patch: &Tensor) -> Result<Vec<f32>> {
    if patch.shape != [RECEPTIVE_FIELD, RECEPTIVE_FIELD, params.spec.in_channels()] {
        return Err(Error::invalid(format!(
            "patch must be [{RECEPTIVE_FIELD}, {RECEPTIVE_FIELD}, {}], got {:?}",
            params.spec.in_channels(),
            patch.shape
        )));
    }
    let (logits, _) = forward(&ops(&params.spec), &params.refs(), Map::<f32>::from_hwc(patch)?, false)?;
    Ok(logits.data.iter().map(|z| sigmoid(*z)).collect())
}

/// Stable binary cross-entropy on the executed bin only.
///
/// Returns the loss and its gradient with respect to every logit; entries other
/// than `executed_bin` are exactly zero.
pub fn masked_loss<S: Scalar>(logits: &[S], label: bool, executed_bin: usize) -> Result<(S, Vec<S>)> {
    if executed_bin >= logits.len() {
        return Err(Error::invalid(format!(
            "executed bin {executed_bin} out of range for {} bins",
            logits.len()
        )));
    }
    let z = logits[executed_bin];
    let y = if label { S::one() } else { S::zero() };
    let loss = softplus(z) - y * z;
    let mut grad = vec![S::zero(); logits.len()];
    grad[executed_bin] = sigmoid(z) - y;
    Ok((loss, grad))
}

/// Loss of one patch and its parameter gradients.
pub(crate) fn loss_and_grad<S: Scalar>(
    ops: &[Op],
    weights: &[LayerRef<'_, S>],
    input: Map<S>,
    label: bool,
    bin: usize,
    grads: &mut [(Vec<S>, Vec<S>)],
) -> Result<(S, S)> {
    let (logits, saved) = forward(ops, weights, input, true)?;
    if logits.h * logits.w != 1 {
        return Err(Error::invalid("training patches must produce a single output cell"));
    }
    let (loss, d) = masked_loss(&logits.data, label, bin)?;
    let prob = sigmoid(logits.data[bin]);
    backward(ops, weights, saved, d, grads);
    Ok((loss, prob))
}

pub(crate) fn zero_grads<S: Scalar>(spec: &ModelSpec) -> Vec<(Vec<S>, Vec<S>)> {
    spec.weighted_layers()
        .into_iter()
        .map(|(cin, cout, k, _, _)| (vec![S::zero(); cout * cin * k * k], vec![S::zero(); cout]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // A = [[1,2,3],[4,5,6]], B = [[1,0],[0,1],[1,1]]
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        f64::gemm(2, 3, 2, &a, false, &b, false, &mut c, 0.0);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // same product with both operands stored transposed
        let at = [1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0f64, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [1.0f64; 4];
        f64::gemm(2, 3, 2, &at, true, &bt, true, &mut c2, 1.0);
        assert_eq!(c2, [5.0, 6.0, 11.0, 12.0]);
    }

    #[test]
    fn masked_loss_examples() {
        let (loss, grad) = masked_loss(&[0.0f64; 9], true, 3).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        for (i, g) in grad.iter().enumerate() {
            if i == 3 {
                assert!((g + 0.5).abs() < 1e-12);
            } else {
                assert_eq!(*g, 0.0);
            }
        }
        let (l0, _) = masked_loss(&[0.0f32], false, 0).unwrap();
        assert!((l0 - std::f32::consts::LN_2).abs() < 1e-6);
        // saturated logits stay finite
        let (big, _) = masked_loss(&[200.0f64], false, 0).unwrap();
        assert!((big - 200.0).abs() < 1e-9);
        assert!(masked_loss(&[0.0f64], true, 1).is_err());
    }

    #[test]
    fn init_is_truncated_and_seeded() {
        let spec = ModelSpec::default_for(1).unwrap();
        let a = init_params(&spec, 3);
        let b = init_params(&spec, 3);
        assert_eq!(a, b);
        assert_ne!(a, init_params(&spec, 4));
        let w: Vec<f32> = a.layers.iter().flat_map(|l| l.weight.data.iter().copied()).collect();
        let std = INIT_STD;
        assert!(w.iter().all(|v| (v.abs() as f64) <= 0.1));
        let mean = w.iter().map(|v| *v as f64).sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / w.len() as f64;
        // truncation at 2σ shrinks the std to about 0.88σ
        assert!(mean.abs() < 0.01 && (var.sqrt() / std - 0.88).abs() < 0.05, "{mean} {}", var.sqrt());
        assert!(a.layers.iter().all(|l| l.bias.data.iter().all(|b| *b == 0.0)));
        assert_eq!(
            a.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>(),
            spec.parameter_count()
        );
    }

    #[test]
    fn pool_and_conv_sizes() {
        let spec = ModelSpec::tiny(9).unwrap();
        let params = init_params(&spec, 1);
        let patch = Tensor::zeros(vec![227, 227, 3]);
        let p = forward_patch(&params, &patch).unwrap();
        assert_eq!(p.len(), 9);
        assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!(forward_patch(&params, &Tensor::zeros(vec![226, 227, 3])).is_err());
    }
}
