use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::huber::{huber, huber_derivative};
use crate::error::{Result, SalcError};

/// Hidden layer widths used by default.
pub const DEFAULT_HIDDEN: [usize; 5] = [64, 256, 512, 128, 64];

/// Dense layer `y = W x + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }
}

/// Fully connected network: rectified hidden layers, identity output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
}

/// Parameter gradients, one entry per layer.
pub type Gradients = Vec<Dense>;

impl Network {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(SalcError::invalid("network needs at least one layer"));
        }
        for (h, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(SalcError::Shape {
                    expected: format!("layer {} input {}", h + 1, pair[0].n_out()),
                    got: pair[1].n_in().to_string(),
                });
            }
        }
        if let Some(h) = layers.iter().position(|d| d.b.len() != d.n_out()) {
            return Err(SalcError::Shape {
                expected: format!("layer {h} bias of {}", layers[h].n_out()),
                got: layers[h].b.len().to_string(),
            });
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(n_in: usize, hidden: &[usize], n_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::widths(n_in, hidden, n_out)
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit)),
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(n_in: usize, hidden: &[usize], n_out: usize) -> Self {
        let layers = Self::widths(n_in, hidden, n_out)
            .windows(2)
            .map(|w| Dense {
                w: Array2::zeros((w[1], w[0])),
                b: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    fn widths(n_in: usize, hidden: &[usize], n_out: usize) -> Vec<usize> {
        std::iter::once(n_in)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(n_out))
            .collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::n_out).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|d| d.w.len() + d.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|d| d.w.iter().chain(d.b.iter()).all(|v| v.is_finite()))
    }

    /// Output for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.n_in() {
            return Err(SalcError::Shape {
                expected: format!("input of length {}", self.n_in()),
                got: input.len().to_string(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous");
        Ok(self.forward_batch(x).into_raw_vec_and_offset().0)
    }

    /// Outputs for a batch, one sample per row.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = inputs.to_owned();
        for (h, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w.t());
            z += &layer.b;
            if h < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Mean Huber loss over samples and output components, with its gradient.
    pub fn loss_and_gradients(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        gamma: f64,
    ) -> (f64, Gradients) {
        let last = self.layers.len() - 1;
        // activations[h] is the input of layer h
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_owned());
        for (h, layer) in self.layers.iter().enumerate() {
            let mut z = activations[h].dot(&layer.w.t());
            z += &layer.b;
            if h < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        let output = &activations[self.layers.len()];
        let scale = 1.0 / output.len() as f64;
        let mut loss = 0.0;
        let mut delta = Array2::zeros(output.raw_dim());
        ndarray::Zip::from(&mut delta)
            .and(output)
            .and(targets)
            .for_each(|d, &p, &t| {
                let r = t - p;
                loss += huber(r, gamma);
                *d = -huber_derivative(r, gamma) * scale;
            });
        loss *= scale;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for h in (0..self.layers.len()).rev() {
            let a_prev = &activations[h];
            let gw = delta.t().dot(a_prev);
            let gb = delta.sum_axis(Axis(0));
            if h > 0 {
                let mut back = delta.dot(&self.layers[h].w);
                // rectifier derivative from the stored (post-activation) values
                ndarray::Zip::from(&mut back)
                    .and(a_prev)
                    .for_each(|g, &a| {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    });
                delta = back;
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        (loss, grads)
    }

    /// `theta <- theta - eta * grad`.
    pub fn apply_step(&mut self, grads: &Gradients, eta: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.w.scaled_add(-eta, &g.w);
            layer.b.scaled_add(-eta, &g.b);
        }
    }
}
