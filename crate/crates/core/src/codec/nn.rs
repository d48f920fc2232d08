//! Fully connected layers with hand-written backpropagation.
//!
//! Activations are row-major batches: one sample per row.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => x.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the layer's
    /// post-activation output.
    fn backprop(self, output: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.zip_mut_with(output, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Sigmoid => grad.zip_mut_with(output, |g, &y| *g *= y * (1.0 - y)),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `y = act(x W + b)` with `W` stored `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &Dense) -> Self {
        DenseGrad {
            weight: Array2::zeros(layer.weight.dim()),
            bias: Array1::zeros(layer.bias.len()),
        }
    }

    pub fn add_assign(&mut self, other: &DenseGrad) {
        self.weight += &other.weight;
        self.bias += &other.bias;
    }
}

impl Dense {
    /// Uniform fan-in initialization, `U(−√(6/fan_in), √(6/fan_in))`, zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / inputs.max(1) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-limit..limit));
        Dense {
            weight,
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        self.activation.apply(&mut y);
        y
    }

    /// Given the layer input, its output and `dL/dy`, returns the parameter
    /// gradient and `dL/dx`.
    pub fn backward(
        &self,
        input: ArrayView2<'_, f64>,
        output: &Array2<f64>,
        grad_out: &Array2<f64>,
        need_input_grad: bool,
    ) -> (DenseGrad, Option<Array2<f64>>) {
        let mut g = grad_out.clone();
        self.activation.backprop(output, &mut g);
        let weight = input.t().dot(&g);
        let bias = g.sum_axis(Axis(0));
        let gx = need_input_grad.then(|| g.dot(&self.weight.t()));
        (DenseGrad { weight, bias }, gx)
    }

    /// `dL/dx` only, for frozen layers.
    pub fn backward_input(&self, output: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
        let mut g = grad_out.clone();
        self.activation.backprop(output, &mut g);
        g.dot(&self.weight.t())
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer outputs from a forward pass; `outputs[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub outputs: Vec<Array2<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("trace holds at least the input")
    }
}

impl Mlp {
    /// Layers `sizes[i] → sizes[i+1]`, hidden activations `hidden`, last layer
    /// `last`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, last: Activation, rng: &mut R) -> Self {
        let n = sizes.len().saturating_sub(1);
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { last } else { hidden };
                Dense::init(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.inputs()).collect();
        if let Some(l) = self.layers.last() {
            s.push(l.outputs());
        }
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut cur = x.to_owned();
        for layer in &self.layers {
            cur = layer.forward(cur.view());
        }
        cur
    }

    pub fn forward_trace(&self, x: ArrayView2<'_, f64>) -> MlpTrace {
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward(outputs.last().unwrap().view());
            outputs.push(next);
        }
        MlpTrace { outputs }
    }

    /// Parameter gradients in layer order and `dL/dx`.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &Array2<f64>) -> (Vec<DenseGrad>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (pg, gx) = layer.backward(trace.outputs[i].view(), &trace.outputs[i + 1], &g, true);
            grads.push(pg);
            g = gx.expect("input gradient requested");
        }
        grads.reverse();
        (grads, g)
    }

    pub fn backward_input(&self, trace: &MlpTrace, grad_out: &Array2<f64>) -> Array2<f64> {
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward_input(&trace.outputs[i + 1], &g);
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }
}
