use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::cross_entropy_with_grad;
use super::mlp::{Dense, MlpParams, DEFAULT_HIDDEN};
use super::NeuralError;
use crate::filters::{Backbone, FilterParams, FilterTerms, DEFAULT_JACOBI_A, DEFAULT_JACOBI_B};

/// Architecture and fixed hyperparameters of a filter + MLP model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub backbone: Backbone,
    /// Polynomial order `K`.
    pub order: usize,
    pub plus: bool,
    /// Weight of the propagated terms against the basis. Not trained.
    pub beta: f64,
    pub jacobi_a: f64,
    pub jacobi_b: f64,
    /// Output width of JacobiConv's input transform; defaults to the feature dimension.
    pub jacobi_out: Option<usize>,
    pub hidden: Vec<usize>,
}

pub const DEFAULT_ORDER: usize = 10;

impl ModelSpec {
    pub fn new(backbone: Backbone) -> Self {
        Self {
            backbone,
            order: DEFAULT_ORDER,
            plus: false,
            beta: 1.0,
            jacobi_a: DEFAULT_JACOBI_A,
            jacobi_b: DEFAULT_JACOBI_B,
            jacobi_out: None,
            hidden: vec![DEFAULT_HIDDEN, DEFAULT_HIDDEN],
        }
    }

    pub fn filter_params(&self, feature_dim: usize) -> FilterParams {
        let channels = self.filter_output_dim(feature_dim);
        let mut p = FilterParams::new(self.backbone, self.order, channels);
        p.jacobi_a = self.jacobi_a;
        p.jacobi_b = self.jacobi_b;
        p.plus = self.plus;
        p.beta = if self.plus { self.beta } else { 1.0 };
        p
    }

    pub fn filter_output_dim(&self, feature_dim: usize) -> usize {
        match self.backbone {
            Backbone::Jacobi => self.jacobi_out.unwrap_or(feature_dim),
            _ => feature_dim,
        }
    }
}

// Independent RNG streams so the head and the Jacobi transform never shift
// each other's draws.
const MLP_STREAM: u64 = 11;
const JACOBI_STREAM: u64 = 12;

/// Filter coefficients, optional JacobiConv input transform and MLP head.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    pub filter: FilterParams,
    pub jacobi_w: Option<Array2<f64>>,
    pub mlp: MlpParams,
}

/// Gradients in the same layout as [`SpectralModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub filter: Array2<f64>,
    pub jacobi_w: Option<Array2<f64>>,
    pub mlp: Vec<Dense>,
}

impl Gradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.filter.iter().copied().collect();
        if let Some(w) = &self.jacobi_w {
            out.extend(w.iter());
        }
        for l in &self.mlp {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

impl SpectralModel {
    pub fn init(spec: &ModelSpec, feature_dim: usize, num_classes: usize, seed: u64) -> Self {
        let filter = spec.filter_params(feature_dim);
        let z_dim = spec.filter_output_dim(feature_dim);

        let jacobi_w = (spec.backbone == Backbone::Jacobi).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(JACOBI_STREAM);
            let limit = (6.0 / (feature_dim + z_dim) as f64).sqrt();
            Array2::from_shape_fn((feature_dim, z_dim), |_| rng.random_range(-limit..limit))
        });

        let mut dims = vec![z_dim];
        dims.extend(&spec.hidden);
        dims.push(num_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(MLP_STREAM);
        let mlp = MlpParams::init(&dims, &mut rng);

        Self {
            filter,
            jacobi_w,
            mlp,
        }
    }

    pub fn num_params(&self) -> usize {
        self.filter.coeffs.len() + self.jacobi_w.as_ref().map_or(0, |w| w.len()) + self.mlp.num_params()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.filter.coeffs.iter().copied().collect();
        if let Some(w) = &self.jacobi_w {
            out.extend(w.iter());
        }
        for l in &self.mlp.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut pos = 0;
        let mut take = |dst: &mut dyn Iterator<Item = &mut f64>| {
            for v in dst {
                *v = flat[pos];
                pos += 1;
            }
        };
        take(&mut self.filter.coeffs.iter_mut());
        if let Some(w) = &mut self.jacobi_w {
            take(&mut w.iter_mut());
        }
        for l in &mut self.mlp.layers {
            take(&mut l.weight.iter_mut());
            take(&mut l.bias.iter_mut());
        }
    }

    /// Filter output `Z` on the rows covered by `terms`.
    pub fn filter_output(&self, terms: &FilterTerms) -> Result<Array2<f64>, NeuralError> {
        Ok(terms.combine(&self.filter, self.jacobi_w.as_ref())?)
    }

    pub fn logits(&self, terms: &FilterTerms) -> Result<Array2<f64>, NeuralError> {
        let z = self.filter_output(terms)?;
        self.mlp.forward(z.view())
    }

    /// Summed cross-entropy over all rows of `terms` (row `i` has label
    /// `labels[i]`) and its gradient with respect to every learnable tensor.
    pub fn loss_and_grad(&self, terms: &FilterTerms, labels: &[usize]) -> Result<(f64, Gradients), NeuralError> {
        if labels.len() != terms.rows() {
            return Err(NeuralError::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                terms.rows()
            )));
        }
        let z = self.filter_output(terms)?;
        let (logits, cache) = self.mlp.forward_cached(z.view())?;
        let idx: Vec<usize> = (0..labels.len()).collect();
        let (loss, grad_logits) = cross_entropy_with_grad(logits.view(), labels, &idx)?;
        let (mlp, grad_z) = self.mlp.backward(&cache, &grad_logits);
        let (filter, jacobi_w) = terms.backward(&self.filter, self.jacobi_w.as_ref(), &grad_z)?;
        Ok((
            loss,
            Gradients {
                filter,
                jacobi_w,
                mlp,
            },
        ))
    }

    pub fn loss(&self, terms: &FilterTerms, labels: &[usize]) -> Result<f64, NeuralError> {
        let logits = self.logits(terms)?;
        let idx: Vec<usize> = (0..labels.len()).collect();
        super::loss::cross_entropy_loss(logits.view(), labels, &idx)
    }
}
