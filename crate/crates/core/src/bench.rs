//! Homophily source resolution, single training runs and β sweeps with
//! their CSV/JSON reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_bundle, train_label_homophily, Dataset, DatasetError};
use crate::filters::Backbone;
use crate::graph::{edge_homophily, GraphError};
use crate::homophily::{
    run_estimator, CostRates, EstimatorConfig, HomophilyError, HomophilyReport, HttpClient, MockClient,
    PromptOptions, PromptStrategy, PromptVariant, DEFAULT_ENDPOINT,
};
use crate::neural::{train, ModelSpec, NeuralError, TrainConfig, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_ORDER};

pub const RESULTS_HEADER: [&str; 9] = [
    "backbone", "plus", "beta", "seed", "h_source", "h_hat", "test_acc", "epoch_ms", "total_s",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Homophily(#[from] HomophilyError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

fn io_err(path: &Path, e: impl fmt::Display) -> BenchError {
    BenchError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Where the homophily estimate fed to the basis comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HomophilySource {
    Llm,
    Mock,
    TrainLabels,
    GroundTruth,
    Fixed(f64),
    File(PathBuf),
}

impl fmt::Display for HomophilySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Llm => f.write_str("llm"),
            Self::Mock => f.write_str("mock"),
            Self::TrainLabels => f.write_str("train_labels"),
            Self::GroundTruth => f.write_str("ground_truth"),
            Self::Fixed(v) => write!(f, "fixed:{v}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for HomophilySource {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(v) = s.strip_prefix("fixed:") {
            let h: f64 = v
                .parse()
                .map_err(|_| BenchError::Config(format!("`{v}` is not a number")))?;
            if !(0.0..=1.0).contains(&h) {
                return Err(BenchError::Config(format!("fixed homophily {h} outside [0, 1]")));
            }
            return Ok(Self::Fixed(h));
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(Self::File(PathBuf::from(p)));
        }
        match s {
            "llm" => Ok(Self::Llm),
            "mock" => Ok(Self::Mock),
            "train_labels" | "train-labels" => Ok(Self::TrainLabels),
            "ground_truth" | "ground-truth" => Ok(Self::GroundTruth),
            other => Err(BenchError::Config(format!(
                "unknown homophily source `{other}` (llm, mock, train_labels, ground_truth, fixed:<h>, file:<path>)"
            ))),
        }
    }
}

impl Serialize for HomophilySource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HomophilySource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Settings for the sampled-edge estimator (llm and mock sources).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub sample_size: usize,
    pub votes: usize,
    pub strategy: PromptVariant,
    pub seed: u64,
    /// Answer flip probability of the mock client.
    pub flip_prob: f64,
    pub endpoint: String,
    pub model: String,
    pub input_rate: f64,
    pub output_rate: f64,
    pub parallelism: usize,
    pub char_budget: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        Self {
            sample_size: est.sample_size,
            votes: est.strategy.votes,
            strategy: est.strategy.variant,
            seed: est.seed,
            flip_prob: 0.0,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            model: est.prompt.model,
            input_rate: 0.0,
            output_rate: 0.0,
            parallelism: est.parallelism,
            char_budget: est.prompt.char_budget,
        }
    }
}

impl EstimatorSettings {
    pub fn estimator_config(&self, source: &HomophilySource) -> Result<EstimatorConfig, BenchError> {
        Ok(EstimatorConfig {
            sample_size: self.sample_size,
            seed: self.seed,
            strategy: PromptStrategy::with_votes(self.strategy, self.votes)?,
            prompt: PromptOptions {
                model: self.model.clone(),
                char_budget: self.char_budget,
            },
            rates: CostRates {
                input_per_million: self.input_rate,
                output_per_million: self.output_rate,
            },
            parallelism: self.parallelism,
            source: source.to_string(),
        })
    }
}

/// Produces the homophily report for `source`. Sampled sources may return an
/// incomplete report; callers decide whether that is fatal.
pub fn resolve_homophily(
    ds: &Dataset,
    source: &HomophilySource,
    settings: &EstimatorSettings,
) -> Result<HomophilyReport, BenchError> {
    let name = source.to_string();
    Ok(match source {
        HomophilySource::Fixed(h) => HomophilyReport::fixed(*h, name),
        HomophilySource::GroundTruth => HomophilyReport::fixed(edge_homophily(&ds.graph, &ds.labels)?, name),
        HomophilySource::TrainLabels => HomophilyReport::fixed(train_label_homophily(ds)?, name),
        HomophilySource::File(path) => {
            let mut report = HomophilyReport::load(path)?;
            if report.h_hat.is_none() {
                return Err(BenchError::Config(format!("{} holds no estimate", path.display())));
            }
            report.source = name;
            report
        }
        HomophilySource::Mock => {
            let client = MockClient::new(ds.labels.clone(), settings.flip_prob, settings.seed)?;
            run_estimator(ds, &client, &settings.estimator_config(source)?)?
        }
        HomophilySource::Llm => {
            let client = HttpClient::from_env(settings.endpoint.clone())?;
            run_estimator(ds, &client, &settings.estimator_config(source)?)?
        }
    })
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub backbone: Backbone,
    pub plus: bool,
    pub beta: Option<f64>,
    #[serde(rename = "K")]
    pub order: usize,
    pub seed: u64,
    pub h_source: Option<String>,
    pub h_hat_used: Option<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub val_curve: Vec<f64>,
    pub test_accuracy: f64,
    pub per_epoch_ms: f64,
    pub total_s: f64,
}

impl RunMetrics {
    pub fn save(&self, path: &Path) -> Result<(), BenchError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| io_err(path, e))?;
        fs::write(path, json + "\n").map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(path, e))
    }
}

/// Trains one configuration and packages its metrics.
pub fn run_single(
    ds: &Dataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    h_hat: Option<f64>,
    h_source: Option<&str>,
) -> Result<RunMetrics, BenchError> {
    if spec.plus && h_hat.is_none() {
        return Err(BenchError::Config("--plus needs a homophily source".into()));
    }
    let (_, m) = train(ds, spec, cfg, h_hat)?;
    Ok(RunMetrics {
        backbone: spec.backbone,
        plus: spec.plus,
        beta: spec.plus.then_some(spec.beta),
        order: spec.order,
        seed: cfg.seed,
        h_source: h_source.map(str::to_string),
        h_hat_used: if spec.plus { h_hat } else { None },
        epochs: cfg.epochs,
        lr: cfg.learning_rate,
        best_epoch: m.best_epoch,
        val_accuracy: m.val_accuracy,
        val_curve: m.val_curve,
        test_accuracy: m.test_accuracy,
        per_epoch_ms: m.per_epoch_ms,
        total_s: m.total_s,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn default_beta_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Sweep description read from the benchmark JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub dataset: PathBuf,
    pub backbones: Vec<Backbone>,
    pub betas: Vec<f64>,
    /// Also train each backbone without the heterophily basis.
    pub include_original: bool,
    pub seeds: Vec<u64>,
    pub order: usize,
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub patience: Option<usize>,
    pub homophily: HomophilySource,
    pub estimator: EstimatorSettings,
    /// Sweep cells trained concurrently.
    pub parallelism: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            backbones: Backbone::ALL.to_vec(),
            betas: default_beta_grid(),
            include_original: true,
            seeds: vec![0],
            order: DEFAULT_ORDER,
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LEARNING_RATE,
            hidden: crate::neural::DEFAULT_HIDDEN,
            patience: None,
            homophily: HomophilySource::GroundTruth,
            estimator: EstimatorSettings::default(),
            parallelism: 1,
        }
    }
}

impl BenchmarkConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        // Relative dataset paths are taken from the config's directory.
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.seeds.is_empty() {
            return Err(BenchError::Config("seed list is empty".into()));
        }
        if self.backbones.is_empty() {
            return Err(BenchError::Config("backbone list is empty".into()));
        }
        if self.betas.is_empty() && !self.include_original {
            return Err(BenchError::Config("nothing to run: empty β grid and no original runs".into()));
        }
        for &b in &self.betas {
            let on_grid = (b * 10.0 - (b * 10.0).round()).abs() < 1e-9;
            if !(0.0..=1.0).contains(&b) || !on_grid {
                return Err(BenchError::Config(format!("β = {b} is not on the 0.0, 0.1, …, 1.0 grid")));
            }
        }
        if self.epochs == 0 || self.hidden == 0 {
            return Err(BenchError::Config("epochs and hidden width must be positive".into()));
        }
        Ok(())
    }

    fn spec(&self, backbone: Backbone, beta: Option<f64>) -> ModelSpec {
        let mut spec = ModelSpec::new(backbone);
        spec.order = self.order;
        spec.hidden = vec![self.hidden, self.hidden];
        if let Some(b) = beta {
            spec.plus = true;
            spec.beta = b;
        }
        spec
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub backbone: Backbone,
    pub plus: bool,
    pub beta: Option<f64>,
    pub seed: u64,
    pub h_source: String,
    pub h_hat: Option<f64>,
    pub outcome: Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub backbone: Backbone,
    pub plus: bool,
    pub beta: Option<f64>,
    pub h_hat: Option<f64>,
    pub runs: usize,
    pub test_acc: (f64, f64),
    pub epoch_ms: (f64, f64),
    pub total_s: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestBeta {
    pub backbone: Backbone,
    pub beta: f64,
    pub mean: f64,
    pub std: f64,
    pub original_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub homophily: HomophilyReport,
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<CellSummary>,
    pub best: Vec<BestBeta>,
}

impl BenchmarkOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Runs every (backbone, β, seed) cell. Cell failures are kept in the rows.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome, BenchError> {
    cfg.validate()?;
    let ds = load_bundle(&cfg.dataset)?;
    let homophily = resolve_homophily(&ds, &cfg.homophily, &cfg.estimator)?;
    let h_hat = homophily.h_hat;
    let h_source = cfg.homophily.to_string();

    let mut cells: Vec<(Backbone, Option<f64>, u64)> = Vec::new();
    for &backbone in &cfg.backbones {
        let variants = cfg
            .include_original
            .then_some(None)
            .into_iter()
            .chain(cfg.betas.iter().map(|&b| Some(b)));
        for beta in variants {
            for &seed in &cfg.seeds {
                cells.push((backbone, beta, seed));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let rows: Vec<ResultRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(backbone, beta, seed)| {
                let spec = cfg.spec(backbone, beta);
                let tc = TrainConfig {
                    epochs: cfg.epochs,
                    learning_rate: cfg.lr,
                    seed,
                    patience: cfg.patience,
                    ..TrainConfig::default()
                };
                let outcome = match (beta, h_hat) {
                    (Some(_), None) => Err("no homophily estimate available".to_string()),
                    _ => run_single(&ds, &spec, &tc, h_hat, Some(&h_source)).map_err(|e| e.to_string()),
                };
                ResultRow {
                    backbone,
                    plus: beta.is_some(),
                    beta,
                    seed,
                    h_source: h_source.clone(),
                    h_hat: if beta.is_some() { h_hat } else { None },
                    outcome,
                }
            })
            .collect()
    });

    let summaries = summarize(&rows);
    let best = best_betas(&summaries);
    Ok(BenchmarkOutcome {
        homophily,
        rows,
        summaries,
        best,
    })
}

/// Groups successful rows by (backbone, plus, β) in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(Backbone, bool, Option<f64>, Option<f64>)> = Vec::new();
    for r in rows {
        let key = (r.backbone, r.plus, r.beta, r.h_hat);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(backbone, plus, beta, h_hat)| {
            let runs: Vec<&RunMetrics> = rows
                .iter()
                .filter(|r| r.backbone == backbone && r.plus == plus && r.beta == beta)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            if runs.is_empty() {
                return None;
            }
            let col = |f: fn(&RunMetrics) -> f64| mean_std(&runs.iter().map(|m| f(m)).collect::<Vec<_>>());
            Some(CellSummary {
                backbone,
                plus,
                beta,
                h_hat,
                runs: runs.len(),
                test_acc: col(|m| m.test_accuracy),
                epoch_ms: col(|m| m.per_epoch_ms),
                total_s: col(|m| m.total_s),
            })
        })
        .collect()
}

/// Highest mean test accuracy over β per backbone; ties go to the smaller β.
pub fn best_betas(summaries: &[CellSummary]) -> Vec<BestBeta> {
    let mut out: Vec<BestBeta> = Vec::new();
    for s in summaries {
        let Some(beta) = s.beta else { continue };
        match out.iter_mut().find(|b| b.backbone == s.backbone) {
            Some(b) if s.test_acc.0 > b.mean => {
                b.beta = beta;
                b.mean = s.test_acc.0;
                b.std = s.test_acc.1;
            }
            Some(_) => {}
            None => out.push(BestBeta {
                backbone: s.backbone,
                beta,
                mean: s.test_acc.0,
                std: s.test_acc.1,
                original_mean: None,
            }),
        }
    }
    for b in &mut out {
        b.original_mean = summaries
            .iter()
            .find(|s| s.backbone == b.backbone && !s.plus)
            .map(|s| s.test_acc.0);
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `results.csv`, `best_beta.csv`, `failures.csv` (when needed) and
/// the `homophily.json` used by the sweep.
pub fn write_benchmark(dir: &Path, outcome: &BenchmarkOutcome) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    outcome.homophily.save(&dir.join("homophily.json"))?;

    let path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(RESULTS_HEADER).map_err(|e| io_err(&path, e))?;
    for r in &outcome.rows {
        let (acc, ms, s) = match &r.outcome {
            Ok(m) => (m.test_accuracy.to_string(), m.per_epoch_ms.to_string(), m.total_s.to_string()),
            Err(_) => ("NaN".into(), "NaN".into(), "NaN".into()),
        };
        let record = [
            r.backbone.name().to_string(),
            r.plus.to_string(),
            opt(r.beta),
            r.seed.to_string(),
            r.h_source.clone(),
            opt(r.h_hat),
            acc,
            ms,
            s,
        ];
        w.write_record(&record).map_err(|e| io_err(&path, e))?;
    }
    let h_source = outcome.rows.first().map(|r| r.h_source.clone()).unwrap_or_default();
    for c in &outcome.summaries {
        for (label, pick) in [("mean", 0usize), ("std", 1)] {
            let get = |p: (f64, f64)| if pick == 0 { p.0 } else { p.1 };
            let record = [
                c.backbone.name().to_string(),
                c.plus.to_string(),
                opt(c.beta),
                label.to_string(),
                h_source.clone(),
                opt(c.h_hat),
                get(c.test_acc).to_string(),
                get(c.epoch_ms).to_string(),
                get(c.total_s).to_string(),
            ];
            w.write_record(&record).map_err(|e| io_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("best_beta.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["backbone", "best_beta", "test_acc_mean", "test_acc_std", "original_mean"])
        .map_err(|e| io_err(&path, e))?;
    for b in &outcome.best {
        w.write_record([
            b.backbone.name().to_string(),
            b.beta.to_string(),
            b.mean.to_string(),
            b.std.to_string(),
            opt(b.original_mean),
        ])
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("failures.csv");
    if outcome.failures() == 0 {
        if path.exists() {
            fs::remove_file(&path).map_err(|e| io_err(&path, e))?;
        }
        return Ok(());
    }
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["backbone", "plus", "beta", "seed", "error"])
        .map_err(|e| io_err(&path, e))?;
    for r in &outcome.rows {
        if let Err(e) = &r.outcome {
            w.write_record([
                r.backbone.name().to_string(),
                r.plus.to_string(),
                opt(r.beta),
                r.seed.to_string(),
                e.clone(),
            ])
            .map_err(|e| io_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))
}
