//! MLP head on top of the filter output, summed cross-entropy, exact
//! gradients and the full-batch training loop.

pub mod loss;
pub mod mlp;
pub mod model;
pub mod optim;
mod train;

pub use loss::{accuracy, cross_entropy_loss, predict};
pub use mlp::{MlpParams, DEFAULT_HIDDEN};
pub use model::{Gradients, ModelSpec, SpectralModel, DEFAULT_ORDER};
pub use optim::{Adam, AdamConfig};
pub use train::{
    evaluate, majority_baseline, prepare_terms, train, Metrics, Split, TrainConfig, TrainedModel,
    DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE,
};

use thiserror::Error;

use crate::basis::BasisError;
use crate::filters::FilterError;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training split is empty")]
    EmptyTrainSet,
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_sbm, SbmConfig, SplitFractions};
    use crate::filters::{Backbone, FilterTerms};
    use crate::graph::Graph;
    use ndarray::Array2;

    fn toy(seed: u64) -> crate::dataset::Dataset {
        gen_sbm(&SbmConfig {
            n: 120,
            num_classes: 3,
            p_in: 0.1,
            p_out: 0.02,
            feature_dim: 4,
            noise: 0.3,
            seed,
            split: SplitFractions::STANDARD,
        })
        .unwrap()
    }

    fn small_spec(backbone: Backbone) -> ModelSpec {
        let mut s = ModelSpec::new(backbone);
        s.order = 3;
        s.hidden = vec![16, 16];
        s
    }

    #[test]
    fn unused_order_gets_zero_gradient() {
        // No edges: Â^k X = 0 for k >= 1.
        let g = Graph::new(6, &[]).unwrap();
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64 * 0.3 - 0.5);
        let spec = small_spec(Backbone::Gpr);
        let model = SpectralModel::init(&spec, 2, 2, 1);
        let terms = FilterTerms::precompute(&g, x.view(), &model.filter, None).unwrap();
        let (_, grads) = model.loss_and_grad(&terms, &[0, 1, 0, 1, 1, 0]).unwrap();
        assert_ne!(grads.filter[[0, 0]], 0.0);
        for k in 1..=3 {
            assert_eq!(grads.filter[[k, 0]], 0.0);
        }
    }

    #[test]
    fn loss_decreases_on_separable_toy() {
        let ds = toy(3);
        let spec = small_spec(Backbone::Gpr);
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let (_, m) = train(&ds, &spec, &cfg, None).unwrap();
        assert!(m.train_loss[49] < 0.5 * m.train_loss[0], "{:?}", m.train_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy(5);
        let mut spec = small_spec(Backbone::Bern);
        spec.plus = true;
        spec.beta = 0.5;
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 1e-3,
            seed: 9,
            ..TrainConfig::default()
        };
        let (_, a) = train(&ds, &spec, &cfg, Some(0.6)).unwrap();
        let (_, b) = train(&ds, &spec, &cfg, Some(0.6)).unwrap();
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.val_curve, b.val_curve);
        assert_eq!(a.test_accuracy, b.test_accuracy);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let ds = toy(1);
        let spec = small_spec(Backbone::Jacobi);
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            seed: 4,
            ..TrainConfig::default()
        };
        let (trained, _) = train(&ds, &spec, &cfg, None).unwrap();
        assert_eq!(trained.model, SpectralModel::init(&spec, 4, 3, 4));
    }

    #[test]
    fn plus_without_estimate_is_rejected() {
        let ds = toy(1);
        let mut spec = small_spec(Backbone::Gpr);
        spec.plus = true;
        assert!(matches!(
            train(&ds, &spec, &TrainConfig::default(), None),
            Err(NeuralError::Config(_))
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let ds = toy(1);
        let spec = small_spec(Backbone::Gpr);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&ds, &spec, &cfg, None), Err(NeuralError::Config(_))));
    }

    #[test]
    fn beta_one_plus_trains_identically() {
        let ds = toy(2);
        let spec = small_spec(Backbone::Cheb2);
        let mut plus = spec.clone();
        plus.plus = true;
        plus.beta = 1.0;
        let cfg = TrainConfig {
            epochs: 20,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let (_, a) = train(&ds, &spec, &cfg, None).unwrap();
        let (_, b) = train(&ds, &plus, &cfg, Some(0.3)).unwrap();
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.test_accuracy, b.test_accuracy);
    }

    #[test]
    fn evaluate_reports_split_accuracy() {
        let ds = toy(4);
        let spec = small_spec(Backbone::Gpr);
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let (trained, m) = train(&ds, &spec, &cfg, None).unwrap();
        assert_eq!(evaluate(&trained, &ds, Split::Test).unwrap(), m.test_accuracy);
        let acc = evaluate(&trained, &ds, Split::Train).unwrap();
        assert!((0.0..=1.0).contains(&acc));
        let mut empty = ds.clone();
        empty.splits.val.clear();
        assert!(matches!(evaluate(&trained, &empty, Split::Val), Err(NeuralError::EmptySplit)));
    }
}
