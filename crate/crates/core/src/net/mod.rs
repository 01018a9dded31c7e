//! Feed-forward networks with exact reverse-mode gradients.
//!
//! Weights are stored row-major with shape `(out, in)`. Everything is `f64`.

mod adam;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::check_len;
use crate::{Error, Result};

pub use adam::{Adam, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => libm::tanh(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidSpec(alloc::format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

/// One affine map followed by an element-wise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidSpec("layer dimensions must be positive".into()));
        }
        check_len("layer weights", in_dim * out_dim, weights.len())?;
        check_len("layer biases", out_dim, biases.len())?;
        if !weights.iter().chain(&biases).all(|p| p.is_finite()) {
            return Err(Error::Numeric("layer parameters"));
        }
        Ok(Layer {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major `(out, in)` weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.biases)
                .map(|(row, b)| b + dot(row, input)),
        );
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (a4, a_rest) = a.split_at(a.len() - a.len() % 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = a_rest.iter().zip(b_rest).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNet {
    layers: Vec<Layer>,
}

impl LayeredNet {
    /// Builds a net with uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights
    /// and zero biases. `sizes` includes the input width.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(sizes, activations, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidSpec(
                "a net needs an input size and at least one layer".into(),
            ));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidSpec(alloc::format!(
                "{} activations for {} layers",
                activations.len(),
                sizes.len() - 1
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidSpec("zero-width layer".into()));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / libm::sqrt(fan_in as f64);
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Layer::new(fan_in, fan_out, activation, weights, vec![0.0; fan_out])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LayeredNet { layers })
    }

    /// Assembles a net from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSpec("a net needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_len("layer chaining", pair[0].out_dim, pair[1].in_dim)?;
        }
        Ok(LayeredNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Layer widths including the input, e.g. `[3, 64, 64, 2]`.
    pub fn sizes(&self) -> Vec<usize> {
        core::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim * l.in_dim + l.out_dim)
            .sum()
    }

    /// All parameters, layer by layer: weights then biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn same_shape(&self, other: &LayeredNet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    fn check_same_shape(&self, other: &LayeredNet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape {
                context: "net shapes",
                expected: self.param_count(),
                got: other.param_count(),
            })
        }
    }

    /// Largest absolute parameter difference between two same-shaped nets.
    pub fn max_abs_diff(&self, other: &LayeredNet) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .params()
            .zip(other.params())
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("net input", self.input_dim(), input.len())?;
        if !input.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric("net input"));
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine(&current, &mut next);
            for v in next.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            core::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Forward pass that keeps what [`LayeredNet::backward_trace`] needs.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        check_len("net input", self.input_dim(), input.len())?;
        if !input.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric("net input"));
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        outputs.push(input.to_vec());
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine(&outputs[outputs.len() - 1], &mut z);
            let y = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            outputs.push(y);
        }
        Ok(Trace { outputs, pre })
    }

    /// Gradient of `upstream · forward(input)` with respect to the parameters
    /// and to the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_trace(&trace, upstream, 1.0, Some(&mut grads))?;
        Ok((grads, input_grad))
    }

    /// Backpropagates `upstream` through a recorded pass. Parameter gradients
    /// are scaled by `scale` and added into `grads` when given; the returned
    /// input gradient is not scaled.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        upstream: &[f64],
        scale: f64,
        mut grads: Option<&mut Gradients>,
    ) -> Result<Vec<f64>> {
        check_len("upstream gradient", self.output_dim(), upstream.len())?;
        check_len("trace depth", self.layers.len(), trace.pre.len())?;
        if let Some(g) = grads.as_deref() {
            check_len("gradient depth", self.layers.len(), g.layers.len())?;
        }
        let mut delta: Vec<f64> = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[k];
            let y = &trace.outputs[k + 1];
            let x = &trace.outputs[k];
            check_len("trace width", layer.out_dim, z.len())?;
            for ((d, &zi), &yi) in delta.iter_mut().zip(z).zip(y) {
                *d *= layer.activation.derivative(zi, yi);
            }
            if let Some(g) = grads.as_deref_mut() {
                let lg = &mut g.layers[k];
                for ((row, gb), &d) in lg
                    .weights
                    .chunks_exact_mut(layer.in_dim)
                    .zip(lg.biases.iter_mut())
                    .zip(&delta)
                {
                    if d == 0.0 {
                        continue;
                    }
                    let sd = scale * d;
                    *gb += sd;
                    for (gw, &xi) in row.iter_mut().zip(x) {
                        *gw += sd * xi;
                    }
                }
            }
            let mut prev = vec![0.0; layer.in_dim];
            for (row, &d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                if d != 0.0 {
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// `target <- tau * online + (1 - tau) * target`, parameter by parameter.
    pub fn soft_update(&mut self, online: &LayeredNet, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidSpec(alloc::format!("tau {tau} outside [0, 1]")));
        }
        self.check_same_shape(online)?;
        for (t, &p) in self.params_mut().zip(online.params()) {
            *t = tau * p + (1.0 - tau) * *t;
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `outputs[0]` is the input, `outputs[k + 1]` the output of layer `k`.
    outputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.outputs[self.outputs.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Per-layer parameter gradients, congruent with the net they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &LayeredNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGrad] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerGrad] {
        &mut self.layers
    }

    /// Same order as [`LayeredNet::params`].
    pub fn values(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.values_mut() {
            *g *= factor;
        }
    }

    pub fn matches(&self, net: &LayeredNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        check_len("gradient size", self.len(), other.len())?;
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
