//! Dense tanh networks with hand-written backprop, Adam, and a linear
//! learning-rate schedule.
//!
//! Parameters live in one flat `Vec<f64>`; per layer the weight matrix is
//! stored row-major (`out x in`) followed by the bias vector. Gradients and
//! optimizer moments use the same layout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_WIDTH: usize = 64;

/// Multilayer perceptron: tanh on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`]; `layers[0]` is the input
/// and `layers[k]` the output of layer `k`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().unwrap()
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Row-major `rows x cols` matrix with orthonormal rows (if rows <= cols) or
/// orthonormal columns, scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    // `short` vectors of length `long`, orthonormalized by modified Gram-Schmidt.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| standard_normal(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            m[r * cols + c] = gain * if rows <= cols { basis[r][c] } else { basis[c][r] };
        }
    }
    m
}

impl Mlp {
    /// All-zero network with the given layer widths.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::config(
                "widths",
                "need at least input and output widths, all positive",
            ));
        }
        Ok(Mlp {
            widths: widths.to_vec(),
            params: vec![0.0; param_count(widths)],
        })
    }

    /// Orthogonal weights (`hidden_gain` on hidden layers, `output_gain` on
    /// the last layer), zero biases.
    pub fn orthogonal_init<R: Rng + ?Sized>(
        widths: &[usize],
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        let n_layers = widths.len() - 1;
        let mut offset = 0;
        for k in 0..n_layers {
            let (fan_in, fan_out) = (widths[k], widths[k + 1]);
            let gain = if k + 1 == n_layers { output_gain } else { hidden_gain };
            let w = orthogonal(fan_out, fan_in, gain, rng);
            net.params[offset..offset + w.len()].copy_from_slice(&w);
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Small random weights, mostly for tests.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for p in net.params.iter_mut() {
            *p = scale * (2.0 * rng.gen::<f64>() - 1.0);
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
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

    pub fn from_parts(widths: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let expected = param_count(&widths);
        if params.len() != expected {
            return Err(Error::Dimension {
                context: "mlp parameters".into(),
                expected,
                found: params.len(),
            });
        }
        let mut net = Self::zeros(&widths)?;
        net.params = params;
        Ok(net)
    }

    /// `(weight offset, bias offset)` of layer `k`.
    fn offsets(&self, k: usize) -> (usize, usize) {
        let start = param_count(&self.widths[..=k]);
        (start, start + self.widths[k] * self.widths[k + 1])
    }

    /// Index of the output-layer bias for unit `j`.
    pub fn output_bias_index(&self, j: usize) -> usize {
        let k = self.widths.len() - 2;
        self.offsets(k).1 + j
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::Dimension {
                context: "mlp input".into(),
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.layers.pop().unwrap())
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let n_layers = self.widths.len() - 1;
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(x.to_vec());
        for k in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[k], self.widths[k + 1]);
            let (w_off, b_off) = self.offsets(k);
            let w = &self.params[w_off..w_off + fan_in * fan_out];
            let b = &self.params[b_off..b_off + fan_out];
            let input = &layers[k];
            let mut out = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + dot(row, input);
                out.push(if k + 1 < n_layers { z.tanh() } else { z });
            }
            layers.push(out);
        }
        Ok(ForwardCache { layers })
    }

    /// Backpropagate `upstream` (gradient w.r.t. the output) through the
    /// cached pass, adding parameter gradients into `grad`. Returns the
    /// gradient w.r.t. the input.
    pub fn backward_accumulate(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_width() {
            return Err(Error::Dimension {
                context: "mlp upstream gradient".into(),
                expected: self.output_width(),
                found: upstream.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "mlp gradient buffer".into(),
                expected: self.params.len(),
                found: grad.len(),
            });
        }
        let n_layers = self.widths.len() - 1;
        // Gradient w.r.t. the pre-activation of the current layer.
        let mut delta = upstream.to_vec();
        for k in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.widths[k], self.widths[k + 1]);
            let (w_off, b_off) = self.offsets(k);
            if k + 1 < n_layers {
                // tanh' = 1 - tanh^2
                for (d, a) in delta.iter_mut().zip(&cache.layers[k + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &cache.layers[k];
            for j in 0..fan_out {
                let dj = delta[j];
                grad[b_off + j] += dj;
                if dj != 0.0 {
                    let row = &mut grad[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                    row.iter_mut().zip(input).for_each(|(g, x)| *g += dj * x);
                }
            }
            let w = &self.params[w_off..w_off + fan_in * fan_out];
            let mut next = vec![0.0; fan_in];
            for j in 0..fan_out {
                let dj = delta[j];
                if dj != 0.0 {
                    let row = &w[j * fan_in..(j + 1) * fan_in];
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += dj * w);
                }
            }
            delta = next;
        }
        Ok(delta)
    }

    /// Parameter and input gradients of `upstream . forward(x)`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cache = self.forward_cached(x)?;
        let mut grad = vec![0.0; self.params.len()];
        let input_grad = self.backward_accumulate(&cache, upstream, &mut grad)?;
        Ok((grad, input_grad))
    }
}

/// Scale `grad` so its L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam step. Rejects non-finite gradients before
    /// touching any state.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                context: "adam update".into(),
                expected: self.m.len(),
                found: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(i));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Linear decay from `initial_lr` to zero over `total_updates`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial_lr: f64,
    pub total_updates: usize,
}

impl LrSchedule {
    pub fn lr_at(&self, update_index: usize) -> f64 {
        if self.total_updates == 0 {
            return 0.0;
        }
        let frac = 1.0 - update_index as f64 / self.total_updates as f64;
        self.initial_lr * frac.max(0.0)
    }
}
