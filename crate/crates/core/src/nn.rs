//! Dense feed-forward networks with hand-written reverse mode, and the
//! optimizers that update them.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WicaError};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, a: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Tanh => a.mapv_into(f64::tanh),
            Activation::Linear => a,
        }
    }

    /// Multiply `g` by the derivative, given the activation's output.
    fn backprop(self, out: &Array2<f64>, g: &mut Array2<f64>) {
        if self == Activation::Tanh {
            g.zip_mut_with(out, |g, &a| *g *= 1.0 - a * a);
        }
    }
}

/// Affine layer `x ↦ x·w + b` with `w` stored input-major (in × out).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((input, output)),
            b: Array1::zeros(output),
        }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Multi-layer perceptron: hidden activation after every layer but the
/// last, output activation after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer outputs from a forward pass; `outputs[0]` is the input.
pub struct ForwardCache {
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache holds the input")
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>, hidden_activation: Activation, output_activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(WicaError::InvalidParameter("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.w.ncols() != l.b.len() {
                return Err(WicaError::Dimension(format!(
                    "layers[{i}]: weight has {} outputs, bias has {}",
                    l.w.ncols(),
                    l.b.len()
                )));
            }
            if i > 0 && layers[i - 1].w.ncols() != l.w.nrows() {
                return Err(WicaError::Dimension(format!(
                    "layers[{i}]: expects {} inputs, previous layer gives {}",
                    l.w.nrows(),
                    layers[i - 1].w.ncols()
                )));
            }
            if l.w.iter().chain(l.b.iter()).any(|v| !v.is_finite()) {
                return Err(WicaError::InvalidParameter(format!("layers[{i}] has non-finite parameters")));
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    /// Tanh hidden layers and a linear output, weights N(0, 1/fan_in),
    /// biases zero.
    pub fn random(sizes: &[usize], rng: &mut RngStream) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(WicaError::InvalidParameter(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|io| {
                let sd = (1.0 / io[0] as f64).sqrt();
                Layer {
                    w: Array2::from_shape_fn((io[0], io[1]), |_| sd * rng.normal()),
                    b: Array1::zeros(io[1]),
                }
            })
            .collect();
        Self::new(layers, Activation::Tanh, Activation::Linear)
    }

    /// Single linear layer computing `x ↦ x·w`.
    pub fn linear(w: Array2<f64>) -> Result<Self> {
        let out = w.ncols();
        Self::new(vec![Layer { w, b: Array1::zeros(out) }], Activation::Tanh, Activation::Linear)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    /// Widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(WicaError::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            a = self.activation(i).apply(a.dot(&l.w) + &l.b);
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_owned());
        for (i, l) in self.layers.iter().enumerate() {
            let a = self.activation(i).apply(outputs[i].dot(&l.w) + &l.b);
            outputs.push(a);
        }
        Ok(ForwardCache { outputs })
    }

    /// Gradients of a scalar loss given `g_out = ∂loss/∂output`. Returns the
    /// per-layer parameter gradients and `∂loss/∂input`.
    pub fn backward(&self, cache: &ForwardCache, g_out: &Array2<f64>) -> (Vec<Layer>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = g_out.clone();
        for i in (0..self.layers.len()).rev() {
            self.activation(i).backprop(&cache.outputs[i + 1], &mut g);
            let input = &cache.outputs[i];
            grads.push(Layer {
                w: input.t().dot(&g),
                b: g.sum_axis(Axis(0)),
            });
            g = g.dot(&self.layers[i].w.t());
        }
        grads.reverse();
        (grads, g)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters in layer order, each weight row-major then its bias.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        flatten_layers(&self.layers, out);
    }

    /// Inverse of [`MlpParams::flatten_into`]; returns the values consumed.
    pub fn assign_flat(&mut self, flat: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
        k
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

pub fn flatten_layers(layers: &[Layer], out: &mut Vec<f64>) {
    for l in layers {
        out.extend(l.w.iter());
        out.extend(l.b.iter());
    }
}

/// Update rule applied to a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(WicaError::InvalidParameter(format!("learning rate must be positive, got {lr}")));
        }
        let moments = if kind == OptimizerKind::Adam { n_params } else { 0 };
        Ok(Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        })
    }

    /// One update. Fails without touching `params` if the gradient or the
    /// proposed parameters are non-finite.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(WicaError::Dimension(format!(
                "{} parameters but {} gradient entries",
                params.len(),
                grad.len()
            )));
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(WicaError::Numerical(format!("non-finite gradient entry {k}")));
        }
        let next: Vec<f64> = match self.kind {
            OptimizerKind::Sgd => params.iter().zip(grad).map(|(p, g)| p - self.lr * g).collect(),
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    return Err(WicaError::Dimension("optimizer state does not match parameters".into()));
                }
                let t = self.t + 1;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let mut next = Vec::with_capacity(params.len());
                let mut m = self.m.clone();
                let mut v = self.v.clone();
                for k in 0..params.len() {
                    m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * grad[k];
                    v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
                    let mhat = m[k] / c1;
                    let vhat = v[k] / c2;
                    next.push(params[k] - self.lr * mhat / (vhat.sqrt() + self.eps));
                }
                if next.iter().all(|p| p.is_finite()) {
                    self.m = m;
                    self.v = v;
                    self.t = t;
                }
                next
            }
        };
        if let Some(k) = next.iter().position(|p| !p.is_finite()) {
            return Err(WicaError::Numerical(format!("update made parameter {k} non-finite")));
        }
        params.copy_from_slice(&next);
        Ok(())
    }
}
