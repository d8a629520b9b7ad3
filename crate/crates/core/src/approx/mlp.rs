//! Fully connected network with ReLU hidden layers over a flat parameter vector.
//!
//! Layout per layer: weights `out × in` row-major, then `out` biases.

use std::ops::Range;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArch {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub out_act: OutputActivation,
}

impl MlpArch {
    pub fn new(input: usize, hidden: &[usize], output: usize, out_act: OutputActivation) -> Self {
        Self { input, hidden: hidden.to_vec(), output, out_act }
    }

    /// Scalar-valued ReLU network.
    pub fn scalar(input: usize, hidden: &[usize]) -> Self {
        Self::new(input, hidden, 1, OutputActivation::Identity)
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input);
        w.extend_from_slice(&self.hidden);
        w.push(self.output);
        w
    }

    pub fn num_params(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// e.g. `mlp 5-32-32-1 identity`.
    pub fn descriptor(&self) -> String {
        let w: Vec<String> = self.widths().iter().map(|x| x.to_string()).collect();
        format!("mlp {} {}", w.join("-"), self.out_act.name())
    }

    pub fn parse_descriptor(text: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad architecture descriptor `{text}`"));
        let mut parts = text.split_whitespace();
        if parts.next() != Some("mlp") {
            return Err(bad());
        }
        let widths: Vec<usize> = parts
            .next()
            .ok_or_else(bad)?
            .split('-')
            .map(|w| w.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let out_act = match parts.next() {
            Some("identity") => OutputActivation::Identity,
            Some("tanh") => OutputActivation::Tanh,
            _ => return Err(bad()),
        };
        if widths.len() < 2 || parts.next().is_some() || widths.contains(&0) {
            return Err(bad());
        }
        Ok(Self {
            input: widths[0],
            hidden: widths[1..widths.len() - 1].to_vec(),
            output: widths[widths.len() - 1],
            out_act,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

/// Activations kept from a batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `acts[0]` is the input, `acts[l + 1]` the post-activation output of layer `l`.
    acts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("tape has the input at least")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    arch: MlpArch,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` weights and biases.
    pub fn new<R: Rng + ?Sized>(arch: MlpArch, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        for layer in net.layers() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for p in &mut net.params[layer.w..layer.b + layer.fan_out] {
                *p = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn zeros(arch: MlpArch) -> Self {
        let params = vec![0.0; arch.num_params()];
        Self { arch, params }
    }

    pub fn from_params(arch: MlpArch, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.num_params() {
            return Err(Error::InvalidInput(format!(
                "{} expects {} parameters, got {}",
                arch.descriptor(),
                arch.num_params(),
                params.len()
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
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

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.arch
            .widths()
            .windows(2)
            .map(|w| {
                let layer = Layer { fan_in: w[0], fan_out: w[1], w: off, b: off + w[0] * w[1] };
                off = layer.b + w[1];
                layer
            })
            .collect()
    }

    /// Parameter indices of the output layer.
    pub fn final_layer_range(&self) -> Range<usize> {
        let last = *self.layers().last().expect("at least one layer");
        last.w..last.b + last.fan_out
    }

    fn weights(&self, layer: Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((layer.fan_out, layer.fan_in), &self.params[layer.w..layer.b]).expect("layout")
    }

    fn biases(&self, layer: Layer) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[layer.b..layer.b + layer.fan_out])
    }

    pub fn forward_tape(&self, x: ArrayView2<'_, f64>) -> Tape {
        assert_eq!(x.ncols(), self.arch.input, "input width");
        let layers = self.layers();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(x.to_owned());
        for (l, &layer) in layers.iter().enumerate() {
            let mut z = acts[l].dot(&self.weights(layer).t());
            z += &self.biases(layer);
            if l + 1 < layers.len() {
                z.mapv_inplace(|v| v.max(0.0));
            } else if self.arch.out_act == OutputActivation::Tanh {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        Tape { acts }
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut tape = self.forward_tape(x);
        tape.acts.pop().expect("output")
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row");
        self.forward_batch(view).into_raw_vec_and_offset().0
    }

    /// Output of a scalar network.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.arch.output, 1);
        self.forward(x)[0]
    }

    /// Accumulates `Σ_rows dy·∂y/∂params` into `grad` and returns `dy·∂y/∂x` per row.
    pub fn backward(&self, tape: &Tape, dy: ArrayView2<'_, f64>, grad: &mut [f64]) -> Array2<f64> {
        assert_eq!(grad.len(), self.params.len(), "gradient length");
        let layers = self.layers();
        let mut delta = dy.to_owned();
        if self.arch.out_act == OutputActivation::Tanh {
            delta.zip_mut_with(tape.output(), |d, &y| *d *= 1.0 - y * y);
        }
        for (l, &layer) in layers.iter().enumerate().rev() {
            let input = &tape.acts[l];
            let gw = delta.t().dot(input);
            for (g, v) in grad[layer.w..layer.b].iter_mut().zip(gw.iter()) {
                *g += v;
            }
            for (g, v) in grad[layer.b..layer.b + layer.fan_out].iter_mut().zip(delta.sum_axis(Axis(0)).iter()) {
                *g += v;
            }
            let mut dx = delta.dot(&self.weights(layer));
            if l > 0 {
                dx.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = dx;
        }
        delta
    }

    /// `(∂y/∂params, ∂y/∂x)` of a scalar network at one input.
    pub fn gradient(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let tape = self.forward_tape(view);
        let mut grad = vec![0.0; self.params.len()];
        let one = Array2::from_elem((1, self.arch.output), 1.0);
        let dx = self.backward(&tape, one.view(), &mut grad);
        (grad, dx.into_raw_vec_and_offset().0)
    }

    /// `target ← tau·self + (1 − tau)·target`.
    pub fn soft_update_into(&self, target: &mut Mlp, tau: f64) {
        assert_eq!(self.arch, target.arch, "architectures differ");
        for (t, &p) in target.params.iter_mut().zip(&self.params) {
            *t = tau * p + (1.0 - tau) * *t;
        }
    }
}

/// First/second-moment adaptive step, minimizing.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}
