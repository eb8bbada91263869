use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::NeuralError;

/// Hidden width of the classification head.
pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Fully connected network with ReLU between layers and linear logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

/// Activations kept for the backward pass.
pub struct MlpCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases. `dims = [in, hidden.., out]`.
    pub fn init<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weight: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            layers: dims
                .windows(2)
                .map(|w| Dense {
                    weight: Array2::zeros((w[0], w[1])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, z: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        self.forward_cached(z).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, z: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache), NeuralError> {
        if z.ncols() != self.input_dim() {
            return Err(NeuralError::Shape(format!(
                "MLP expects {} input columns, got {}",
                self.input_dim(),
                z.ncols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = z.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = h.dot(&layer.weight) + &layer.bias;
            if i < last {
                next.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(h);
            h = next;
        }
        Ok((h, MlpCache { inputs }))
    }

    /// Returns parameter gradients and `dL/dZ` for upstream gradient `dL/dlogits`.
    pub fn backward(&self, cache: &MlpCache, grad_logits: &Array2<f64>) -> (Vec<Dense>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_logits.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            grads.push(Dense {
                weight: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            let mut prev = delta.dot(&layer.weight.t());
            if i > 0 {
                // ReLU mask: inputs to layer i are the activations of layer i-1.
                prev.zip_mut_with(input, |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            delta = prev;
        }
        grads.reverse();
        (grads, delta)
    }
}
