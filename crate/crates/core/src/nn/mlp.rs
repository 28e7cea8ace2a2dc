use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{matmul, matmul_nt, matmul_tn_acc, Matrix};
use crate::error::{ensure_dim, Error, Result};

const LN_EPS: f64 = 1e-6;

/// Bounds applied to the log-std half of a [`Head::GaussianSplit`] output.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Transformation applied by [`Mlp::forward`] to the final linear layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Identity,
    Sigmoid,
    /// First half of the outputs is a mean, second half a log-std clipped
    /// to `[LOG_STD_MIN, LOG_STD_MAX]`.
    GaussianSplit,
}

/// Shape of a network: `widths[0]` is the input size, the last entry the
/// output size, everything in between a rectified hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    /// Layer norm (learnable scale and bias) on every hidden layer, applied
    /// before the rectifier. The output layer is never normalized.
    pub layer_norm: bool,
    pub head: Head,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self {
            widths,
            layer_norm: false,
            head: Head::Identity,
        }
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.layer_norm = on;
        self
    }

    pub fn with_head(mut self, head: Head) -> Self {
        self.head = head;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
    /// Offset of the layer-norm scale; the bias follows it.
    ln: Option<usize>,
}

/// Fully connected network whose parameters live in one flat vector, so
/// optimizers, target averaging and checkpoints can treat it as a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layout: Vec<LayerLayout>,
    params: Vec<f64>,
}

/// Activations retained by [`Mlp::forward_cached`] for one batch.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[l + 1]` is the rectified output of layer `l`.
    inputs: Vec<Matrix>,
    /// Normalized pre-activations and per-row inverse std of normed layers.
    norms: Vec<Option<(Matrix, Vec<f64>)>>,
    /// Output of the last linear layer, before the head.
    output: Matrix,
    num_params: usize,
}

impl ForwardCache {
    /// Raw (pre-head) network output.
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn input(&self) -> &Matrix {
        &self.inputs[0]
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// Same layout as [`Mlp::params`].
    pub params: Vec<f64>,
    /// Gradient with respect to the batch input.
    pub input: Matrix,
}

impl Mlp {
    /// Builds a network with fan-in scaled uniform weights, zero biases,
    /// unit layer-norm scales and zero layer-norm biases. Deterministic in `seed`.
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self> {
        if spec.widths.len() < 2 {
            return Err(Error::config("a network needs at least input and output widths"));
        }
        if let Some(pos) = spec.widths.iter().position(|&w| w == 0) {
            return Err(Error::config(format!("layer width {pos} must be positive")));
        }
        if spec.head == Head::GaussianSplit && spec.widths[spec.widths.len() - 1] % 2 != 0 {
            return Err(Error::config("gaussian head needs an even output width"));
        }
        let n_layers = spec.widths.len() - 1;
        let mut layout = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
            let w = offset;
            let b = w + fan_in * fan_out;
            offset = b + fan_out;
            let ln = if spec.layer_norm && l + 1 < n_layers {
                let at = offset;
                offset += 2 * fan_out;
                Some(at)
            } else {
                None
            };
            layout.push(LayerLayout {
                fan_in,
                fan_out,
                w,
                b,
                ln,
            });
        }
        let mut params = vec![0.0; offset];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &layout {
            let bound = (3.0 / layer.fan_in as f64).sqrt();
            for p in &mut params[layer.w..layer.b] {
                *p = rng.random_range(-bound..bound);
            }
            if let Some(ln) = layer.ln {
                params[ln..ln + layer.fan_out].fill(1.0);
            }
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.spec.widths[self.spec.widths.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Replaces all parameters; the length must match.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        ensure_dim("parameter vector", self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Weights of layer `l` as a row-major `fan_in x fan_out` slice.
    pub fn weights(&self, l: usize) -> &[f64] {
        let layer = &self.layout[l];
        &self.params[layer.w..layer.b]
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    /// `self ← (1 − tau)·self + tau·source`.
    pub fn polyak_toward(&mut self, source: &Mlp, tau: f64) {
        debug_assert_eq!(self.params.len(), source.params.len());
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t += tau * (s - *t);
        }
    }

    /// Single-sample forward pass with the head applied.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(&Matrix::row_vector(input))?.into_vec())
    }

    /// Batched forward pass with the head applied.
    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix> {
        let mut out = self.forward_cached(input)?.output;
        self.apply_head(&mut out);
        Ok(out)
    }

    fn apply_head(&self, out: &mut Matrix) {
        match self.spec.head {
            Head::Identity => {}
            Head::Sigmoid => out.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Head::GaussianSplit => {
                let half = out.cols() / 2;
                for r in 0..out.rows() {
                    for v in &mut out.row_mut(r)[half..] {
                        *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
                    }
                }
            }
        }
    }

    /// Forward pass that keeps the activations needed by [`Mlp::backward`].
    /// The cached output is the raw linear output, before the head.
    pub fn forward_cached(&self, input: &Matrix) -> Result<ForwardCache> {
        ensure_dim("network input", self.input_dim(), input.cols())?;
        let n = input.rows();
        let mut inputs = Vec::with_capacity(self.layout.len());
        let mut norms = Vec::with_capacity(self.layout.len());
        inputs.push(input.clone());
        let last = self.layout.len() - 1;
        for (l, layer) in self.layout.iter().enumerate() {
            let x = &inputs[l];
            let mut z = Matrix::zeros(n, layer.fan_out);
            matmul(x, &self.params[layer.w..layer.b], layer.fan_out, &mut z);
            let bias = &self.params[layer.b..layer.b + layer.fan_out];
            for r in 0..n {
                for (v, b) in z.row_mut(r).iter_mut().zip(bias) {
                    *v += b;
                }
            }
            if l == last {
                norms.push(None);
                return Ok(ForwardCache {
                    inputs,
                    norms,
                    output: z,
                    num_params: self.params.len(),
                });
            }
            let norm = layer.ln.map(|ln| {
                let scale = &self.params[ln..ln + layer.fan_out];
                let shift = &self.params[ln + layer.fan_out..ln + 2 * layer.fan_out];
                let mut zhat = Matrix::zeros(n, layer.fan_out);
                let mut inv_std = Vec::with_capacity(n);
                for r in 0..n {
                    let row = z.row_mut(r);
                    let k = row.len() as f64;
                    let mean = row.iter().sum::<f64>() / k;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
                    let inv = 1.0 / (var + LN_EPS).sqrt();
                    inv_std.push(inv);
                    let zh = zhat.row_mut(r);
                    for j in 0..row.len() {
                        zh[j] = (row[j] - mean) * inv;
                        row[j] = zh[j] * scale[j] + shift[j];
                    }
                }
                (zhat, inv_std)
            });
            norms.push(norm);
            z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            inputs.push(z);
        }
        unreachable!("loop returns at the output layer")
    }

    /// Backpropagates `grad_output` (gradient of a scalar loss with respect
    /// to the raw output of `cache`) through the network.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        if cache.num_params != self.params.len() || cache.inputs.len() != self.layout.len() {
            return Err(Error::usage("forward cache was produced by a different network"));
        }
        ensure_dim("output gradient rows", cache.output.rows(), grad_output.rows())?;
        ensure_dim("output gradient cols", self.output_dim(), grad_output.cols())?;
        let n = grad_output.rows();
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_output.clone();
        for l in (0..self.layout.len()).rev() {
            let layer = &self.layout[l];
            let x = &cache.inputs[l];
            matmul_tn_acc(x, &delta, &mut grads[layer.w..layer.b]);
            let gb = &mut grads[layer.b..layer.b + layer.fan_out];
            for r in 0..n {
                for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                    *g += d;
                }
            }
            let mut dx = Matrix::zeros(n, layer.fan_in);
            matmul_nt(&delta, &self.params[layer.w..layer.b], layer.fan_in, &mut dx);
            if l == 0 {
                return Ok(Gradients {
                    params: grads,
                    input: dx,
                });
            }
            // dx is the gradient w.r.t. the rectified output of layer l - 1.
            let prev = &self.layout[l - 1];
            let activated = &cache.inputs[l];
            for (d, a) in dx.as_mut_slice().iter_mut().zip(activated.as_slice()) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            if let (Some(ln), Some((zhat, inv_std))) = (prev.ln, &cache.norms[l - 1]) {
                let k = prev.fan_out;
                let (head, tail) = grads.split_at_mut(ln + k);
                let g_scale = &mut head[ln..ln + k];
                let g_shift = &mut tail[..k];
                let scale = &self.params[ln..ln + k];
                for r in 0..n {
                    let zh = zhat.row(r);
                    let row = dx.row_mut(r);
                    let mut mean_d = 0.0;
                    let mut mean_dz = 0.0;
                    for j in 0..k {
                        g_scale[j] += row[j] * zh[j];
                        g_shift[j] += row[j];
                        row[j] *= scale[j];
                        mean_d += row[j];
                        mean_dz += row[j] * zh[j];
                    }
                    mean_d /= k as f64;
                    mean_dz /= k as f64;
                    for j in 0..k {
                        row[j] = inv_std[r] * (row[j] - mean_d - zh[j] * mean_dz);
                    }
                }
            }
            delta = dx;
        }
        unreachable!("loop returns at the input layer")
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }
}
