//! Small fully connected networks with tanh hidden layers and a linear
//! output, plus hand-written backpropagation.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Layer activations kept from a forward pass for [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of each layer; entry 0 is the batch itself.
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Orthogonal `rows x cols` matrix scaled by `gain`.
pub fn orthogonal<R: rand::Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let q = Array2::from_shape_fn((tall, short), |(i, j)| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        gain * sign * q[(i, j)]
    });
    if rows >= cols {
        q
    } else {
        q.reversed_axes().as_standard_layout().into_owned()
    }
}

impl Mlp {
    /// Layer widths `sizes = [input, hidden.., output]`, orthogonal weights
    /// and zero biases.
    pub fn new<R: rand::Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output widths");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| Dense {
                weight: orthogonal(w[0], w[1], if l == last { output_gain } else { hidden_gain }, rng),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|d| Dense::zeros(d.weight.nrows(), d.weight.ncols())).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width()];
        s.extend(self.layers.iter().map(|d| d.bias.len()));
        s
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].bias.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|d| d.weight.len() + d.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|d| d.weight.iter().chain(d.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|d| d.weight.iter_mut().chain(d.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.params_mut().for_each(|p| *p = value);
    }

    pub fn norm(&self) -> f64 {
        self.params().map(|p| p * p).sum::<f64>().sqrt()
    }

    /// Output for a single input vector.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_width(), "input width");
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, d) in self.layers.iter().enumerate() {
            let mut z = d.bias.to_vec();
            for (xi, row) in a.iter().zip(d.weight.rows()) {
                if *xi != 0.0 {
                    for (zj, w) in z.iter_mut().zip(row) {
                        *zj += xi * w;
                    }
                }
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        a
    }

    /// Batched forward pass, one row per sample.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_trace(x).output
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Trace {
        assert_eq!(x.ncols(), self.input_width(), "input width");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (l, d) in self.layers.iter().enumerate() {
            let mut z = a.dot(&d.weight) + &d.bias;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            inputs.push(a);
            a = z;
        }
        Trace { inputs, output: a }
    }

    /// Accumulate into `grads` the gradient of a loss whose derivative with
    /// respect to the batch output is `d_output`.
    pub fn backward(&self, trace: &Trace, d_output: ArrayView2<f64>, grads: &mut Mlp) {
        let mut delta = d_output.to_owned();
        for l in (0..self.layers.len()).rev() {
            let input = &trace.inputs[l];
            let g = &mut grads.layers[l];
            g.weight += &input.t().dot(&delta);
            g.bias += &delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weight.t());
                back.zip_mut_with(input, |b, &h| *b *= 1.0 - h * h);
                delta = back;
            }
        }
    }
}
