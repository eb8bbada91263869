use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::loss::accuracy;
use super::model::{ModelSpec, SpectralModel};
use super::optim::{Adam, AdamConfig};
use super::NeuralError;
use crate::basis::build_basis_matrix;
use crate::dataset::Dataset;
use crate::filters::FilterTerms;

pub const DEFAULT_EPOCHS: usize = 1000;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            adam: AdamConfig::default(),
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_loss: Vec<f64>,
    pub val_curve: Vec<f64>,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub per_epoch_ms: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// A model together with the propagated terms it was trained on.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: SpectralModel,
    pub terms: FilterTerms,
    pub h_hat: Option<f64>,
}

/// Precomputes the filter terms (and the basis when enabled) for `ds`.
pub fn prepare_terms(ds: &Dataset, spec: &ModelSpec, h_hat: Option<f64>) -> Result<FilterTerms, NeuralError> {
    let params = spec.filter_params(ds.feature_dim());
    let basis = if spec.plus {
        let h = h_hat.ok_or_else(|| {
            NeuralError::Config("the heterophily basis needs a homophily estimate".into())
        })?;
        Some(build_basis_matrix(&ds.graph, ds.features.view(), spec.order, h)?)
    } else {
        None
    };
    Ok(FilterTerms::precompute(&ds.graph, ds.features.view(), &params, basis.as_ref())?)
}

/// Full-batch training on the train split with best-validation checkpointing.
pub fn train(
    ds: &Dataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    h_hat: Option<f64>,
) -> Result<(TrainedModel, Metrics), NeuralError> {
    cfg.validate()?;
    if ds.splits.train.is_empty() {
        return Err(NeuralError::EmptyTrainSet);
    }
    let started = Instant::now();
    let terms = prepare_terms(ds, spec, h_hat)?;

    let train_terms = terms.select_rows(&ds.splits.train);
    let train_labels: Vec<usize> = ds.splits.train.iter().map(|&i| ds.labels[i]).collect();
    let val_terms = terms.select_rows(&ds.splits.val);
    let val_labels: Vec<usize> = ds.splits.val.iter().map(|&i| ds.labels[i]).collect();
    let val_idx: Vec<usize> = (0..val_labels.len()).collect();

    let mut model = SpectralModel::init(spec, ds.feature_dim(), ds.num_classes, cfg.seed);
    let mut flat = model.to_flat();
    let mut opt = Adam::new(flat.len(), cfg.learning_rate, cfg.adam);

    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, SpectralModel)> = None;

    let loop_start = Instant::now();
    for epoch in 0..cfg.epochs {
        let (loss, grads) = model.loss_and_grad(&train_terms, &train_labels)?;
        if !loss.is_finite() {
            return Err(NeuralError::Diverged { epoch, loss });
        }
        train_loss.push(loss);
        opt.step(&mut flat, &grads.to_flat());
        model.set_flat(&flat);

        if val_idx.is_empty() {
            continue;
        }
        let logits = model.logits(&val_terms)?;
        let acc = accuracy(logits.view(), &val_labels, &val_idx)?;
        val_curve.push(acc);
        match &best {
            Some((_, b, _)) if acc <= *b => {}
            _ => best = Some((epoch, acc, model.clone())),
        }
        if let (Some(p), Some((be, _, _))) = (cfg.patience, &best) {
            if epoch - be >= p {
                break;
            }
        }
    }
    let epochs_run = train_loss.len();
    let per_epoch_ms = loop_start.elapsed().as_secs_f64() * 1e3 / epochs_run as f64;

    let (best_epoch, val_accuracy, model) = match best {
        Some(b) => b,
        None => (epochs_run - 1, f64::NAN, model),
    };
    let trained = TrainedModel {
        model,
        terms,
        h_hat: if spec.plus { h_hat } else { None },
    };
    let test_accuracy = if ds.splits.test.is_empty() {
        f64::NAN
    } else {
        evaluate(&trained, ds, Split::Test)?
    };

    let metrics = Metrics {
        train_loss,
        val_curve,
        best_epoch,
        val_accuracy,
        test_accuracy,
        per_epoch_ms,
        total_s: started.elapsed().as_secs_f64(),
    };
    Ok((trained, metrics))
}

/// Argmax accuracy on one split.
pub fn evaluate(trained: &TrainedModel, ds: &Dataset, split: Split) -> Result<f64, NeuralError> {
    let idx = match split {
        Split::Train => &ds.splits.train,
        Split::Val => &ds.splits.val,
        Split::Test => &ds.splits.test,
    };
    if idx.is_empty() {
        return Err(NeuralError::EmptySplit);
    }
    let terms = trained.terms.select_rows(idx);
    let logits = trained.model.logits(&terms)?;
    let labels: Vec<usize> = idx.iter().map(|&i| ds.labels[i]).collect();
    let local: Vec<usize> = (0..idx.len()).collect();
    accuracy(logits.view(), &labels, &local)
}

/// Share of the most common class among the test nodes.
pub fn majority_baseline(ds: &Dataset) -> f64 {
    let mut counts = vec![0usize; ds.num_classes];
    for &i in &ds.splits.test {
        counts[ds.labels[i]] += 1;
    }
    let max = counts.into_iter().max().unwrap_or(0);
    max as f64 / ds.splits.test.len().max(1) as f64
}
