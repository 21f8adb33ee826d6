use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// Fully connected network: tanh on hidden layers, linear output.
///
/// All weights and biases live in one flat buffer; layer `l` stores its
/// `out × in` weight matrix row-major followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Activations recorded by [`DenseNet::forward_taped`] for a later
/// [`DenseNet::backward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardTape {
    activations: Vec<Vec<f64>>,
}

impl ForwardTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }

    pub fn clear(&mut self) {
        self.activations.clear();
    }

    /// Output of the recorded pass.
    pub fn output(&self) -> Option<&[f64]> {
        self.activations.last().map(Vec::as_slice)
    }
}

/// Gradient buffer laid out exactly like the parameters it differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub values: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self { values: vec![0.0; net.params.len()] }
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|g| *g *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }
}

/// Parameters in nested row-major form for JSON checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSnapshot {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl DenseNet {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return arg_err("a network needs at least an input and an output layer, all nonempty");
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len());
        let mut total = 0;
        for w in layer_sizes.windows(2) {
            offsets.push(total);
            total += w[0] * w[1] + w[1];
        }
        offsets.push(total);
        Ok(Self { layer_sizes: layer_sizes.to_vec(), params: vec![0.0; total], offsets })
    }

    /// Orthogonal weights scaled by `hidden_gain` (hidden layers) and
    /// `output_gain` (last layer); zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let n_layers = net.n_layers();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { hidden_gain };
            let w = orthogonal_matrix(fan_out, fan_in, rng);
            let off = net.offsets[l];
            for (p, x) in net.params[off..off + fan_in * fan_out].iter_mut().zip(w) {
                *p = gain * x;
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("nonempty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let off = self.offsets[l];
        let w = &self.params[off..off + fan_in * fan_out];
        let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        (w, b)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return arg_err(format!("network expects {} inputs, got {}", self.input_dim(), input.len()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in 0..self.n_layers() {
            x = self.affine(l, &x);
            if l + 1 < self.n_layers() {
                x.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        Ok(x)
    }

    /// Forward pass that records what [`backward`](Self::backward) needs.
    pub fn forward_taped<'t>(&self, input: &[f64], tape: &'t mut ForwardTape) -> Result<&'t [f64]> {
        self.check_input(input)?;
        tape.activations.clear();
        tape.activations.push(input.to_vec());
        for l in 0..self.n_layers() {
            let mut x = self.affine(l, tape.activations.last().expect("pushed"));
            if l + 1 < self.n_layers() {
                x.iter_mut().for_each(|v| *v = v.tanh());
            }
            tape.activations.push(x);
        }
        Ok(tape.output().expect("recorded"))
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let fan_in = x.len();
        b.iter()
            .enumerate()
            .map(|(o, bo)| bo + w[o * fan_in..(o + 1) * fan_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Accumulates `∂loss/∂θ` into `grads` given `∂loss/∂output`, and
    /// returns `∂loss/∂input`.
    pub fn backward(&self, tape: &ForwardTape, output_adjoint: &[f64], grads: &mut GradientBundle) -> Result<Vec<f64>> {
        if tape.is_empty() {
            return Err(Error::State("backward called without a recorded forward pass".into()));
        }
        if tape.activations.len() != self.layer_sizes.len()
            || tape.activations.iter().zip(&self.layer_sizes).any(|(a, &s)| a.len() != s)
        {
            return Err(Error::State("forward tape was recorded on a different architecture".into()));
        }
        if output_adjoint.len() != self.output_dim() {
            return arg_err("output adjoint has the wrong length");
        }
        if grads.values.len() != self.params.len() {
            return arg_err("gradient bundle does not match the network");
        }
        let mut delta = output_adjoint.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.offsets[l];
            let x = &tape.activations[l];
            {
                let g = &mut grads.values[off..off + fan_in * fan_out + fan_out];
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (gi, xi) in g[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                        *gi += d * xi;
                    }
                    g[fan_in * fan_out + o] += d;
                }
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * wi;
                }
            }
            if l > 0 {
                // x is tanh(pre-activation): d tanh = 1 − x².
                for (p, xi) in prev.iter_mut().zip(x) {
                    *p *= 1.0 - xi * xi;
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    pub fn to_snapshot(&self) -> NetSnapshot {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            weights.push(w.chunks(self.layer_sizes[l]).map(<[f64]>::to_vec).collect());
            biases.push(b.to_vec());
        }
        NetSnapshot { layer_sizes: self.layer_sizes.clone(), weights, biases }
    }

    pub fn from_snapshot(s: &NetSnapshot) -> Result<Self> {
        let mut net = Self::zeros(&s.layer_sizes)?;
        if s.weights.len() != net.n_layers() || s.biases.len() != net.n_layers() {
            return arg_err("snapshot layer count mismatch");
        }
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let rows = &s.weights[l];
            if rows.len() != fan_out || rows.iter().any(|r| r.len() != fan_in) || s.biases[l].len() != fan_out {
                return arg_err(format!("snapshot layer {l} has the wrong shape"));
            }
            let off = net.offsets[l];
            let flat = rows.iter().flatten().chain(&s.biases[l]);
            for (p, v) in net.params[off..net.offsets[l + 1]].iter_mut().zip(flat) {
                *p = *v;
            }
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return arg_err("snapshot contains non-finite parameters");
        }
        Ok(net)
    }
}

/// `rows × cols` matrix with orthonormal rows (if `rows ≤ cols`) or
/// orthonormal columns, from Gram–Schmidt on a Gaussian draw.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (k, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    while vecs.len() < k {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= d * ui);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vecs.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    out
}
