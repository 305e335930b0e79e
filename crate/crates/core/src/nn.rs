//! Dense multilayer perceptron with rectifier hidden layers, an identity
//! output layer and hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Weights are row-major `out x in` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradients with the same shapes as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Pre-activation outputs of every layer; the input is kept as layer 0.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has the input")
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

impl Mlp {
    /// Uniform init in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`, zero biases; keeps
    /// activation variance roughly constant through rectifier layers.
    pub fn new<R: Rng>(layer_dims: &[usize], rng: &mut R) -> Mlp {
        let mut net = Mlp::zeros(layer_dims);
        for (l, w) in net.weights.iter_mut().enumerate() {
            let bound = (6.0 / layer_dims[l] as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        net
    }

    pub fn zeros(layer_dims: &[usize]) -> Mlp {
        assert!(layer_dims.len() >= 2, "an MLP needs input and output dims");
        let pairs = layer_dims.windows(2);
        Mlp {
            layer_dims: layer_dims.to_vec(),
            weights: pairs.clone().map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: pairs.map(|p| vec![0.0; p[1]]).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("non-empty dims")
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for l in 0..self.n_layers() {
            h = self.affine(l, &h);
            if l + 1 < self.n_layers() {
                h.iter_mut().for_each(|v| *v = relu(*v));
            }
        }
        Ok(h)
    }

    /// Forward pass that keeps what [`Mlp::backward`] needs.
    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, ModelError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        activations.push(x.to_vec());
        for l in 0..self.n_layers() {
            let prev = activations.last().expect("input pushed");
            let mut z = self.affine(l, prev);
            if l + 1 < self.n_layers() {
                z.iter_mut().for_each(|v| *v = relu(*v));
            }
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`
    /// and returns `d loss / d input`.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let input = &trace.activations[l];
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let gw = &mut grads.weights[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grads.biases[l][o] += d;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, &wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wv;
                }
            }
            if l > 0 {
                // Rectifier derivative: zero where the stored activation is zero.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `params -= lr * grads`.
    pub fn apply(&mut self, grads: &MlpGrads, lr: f64) {
        for (p, g) in self.weights.iter_mut().chain(self.biases.iter_mut()).zip(grads.weights.iter().chain(&grads.biases)) {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let n_in = self.layer_dims[l];
        let w = &self.weights[l];
        self.biases[l].iter().enumerate().map(|(o, b)| b + dot(&w[o * n_in..(o + 1) * n_in], x)).collect()
    }
}

impl MlpGrads {
    pub fn sum_sq(&self) -> f64 {
        self.weights.iter().chain(&self.biases).flatten().map(|g| g * g).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.weights.iter_mut().chain(self.biases.iter_mut()).flatten() {
            *g *= factor;
        }
    }
}
