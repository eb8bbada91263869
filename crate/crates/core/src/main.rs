use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use specplus::bench::{
    mean_std, resolve_homophily, run_benchmark, run_single, write_benchmark, BenchmarkConfig, EstimatorSettings,
    HomophilySource,
};
use specplus::dataset::{
    expected_sbm_homophily, gen_sbm, load_bundle, save_bundle, SbmConfig, SplitFractions,
};
use specplus::filters::Backbone;
use specplus::graph::edge_homophily;
use specplus::homophily::{HomophilyReport, PromptVariant, API_KEY_ENV};
use specplus::neural::{ModelSpec, TrainConfig, DEFAULT_EPOCHS, DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE, DEFAULT_ORDER};

#[derive(Parser)]
#[command(name = "specplus", version, about = "Homophily-guided polynomial spectral GNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a stochastic block model graph and write it as a bundle.
    GenSbm(GenSbmArgs),
    /// Estimate edge homophily from sampled node pairs and write homophily.json.
    EstimateHomophily(EstimateArgs),
    /// Train one configuration and write metrics.json.
    Train(TrainArgs),
    /// Sweep backbones × β × seeds from a JSON config and write results.csv.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct GenSbmArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    p_in: f64,
    #[arg(long)]
    p_out: f64,
    /// Feature dimension (at least the number of classes).
    #[arg(long)]
    dim: Option<usize>,
    /// Standard deviation of the feature noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SplitFractions::STANDARD.train)]
    train_frac: f64,
    #[arg(long, default_value_t = SplitFractions::STANDARD.val)]
    val_frac: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Estimator knobs shared by every command that may query for homophily.
/// Unset flags keep the defaults (or the config file's values).
#[derive(Args)]
struct EstimatorArgs {
    /// Edges sampled for the estimate.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Queries per edge (1 or odd).
    #[arg(long)]
    votes: Option<usize>,
    /// vanilla, cot, vote or hybrid.
    #[arg(long)]
    strategy: Option<PromptVariant>,
    #[arg(long)]
    estimator_seed: Option<u64>,
    /// Answer flip probability for the mock source.
    #[arg(long)]
    flip_prob: Option<f64>,
    /// OpenAI-compatible chat-completions URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Dollars per million prompt tokens.
    #[arg(long)]
    input_rate: Option<f64>,
    /// Dollars per million completion tokens.
    #[arg(long)]
    output_rate: Option<f64>,
    /// Concurrent edge queries.
    #[arg(long)]
    query_parallelism: Option<usize>,
}

impl EstimatorArgs {
    fn apply(&self, s: &mut EstimatorSettings) {
        if let Some(v) = self.strategy {
            s.strategy = v;
            s.votes = v.default_votes();
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = &self.$field { s.$target = v.clone(); })*
            };
        }
        set!(sample_size => sample_size, votes => votes, estimator_seed => seed, flip_prob => flip_prob,
             endpoint => endpoint, model => model, input_rate => input_rate, output_rate => output_rate,
             query_parallelism => parallelism);
    }

    fn settings(&self) -> EstimatorSettings {
        let mut s = EstimatorSettings::default();
        self.apply(&mut s);
        s
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Bundle directory.
    #[arg(long)]
    data: PathBuf,
    /// llm, mock, train_labels, ground_truth, fixed:<h> or file:<path>.
    #[arg(long, default_value = "llm")]
    source: HomophilySource,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Output file, or a directory to hold homophily.json.
    #[arg(long, default_value = "homophily.json")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// gprgnn, bernnet, jacobiconv or chebnetii.
    #[arg(long)]
    backbone: Backbone,
    /// Mix the heterophily basis into the filter.
    #[arg(long)]
    plus: bool,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Polynomial order K.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Homophily source for the basis; required with --plus.
    #[arg(long)]
    homophily: Option<HomophilySource>,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON sweep description.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    homophily: Option<HomophilySource>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Sweep cells trained concurrently.
    #[arg(long)]
    parallelism: Option<usize>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSbm(a) => cmd_gen_sbm(a),
        Command::EstimateHomophily(a) => cmd_estimate(a),
        Command::Train(a) => cmd_train(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen_sbm(a: GenSbmArgs) -> Result<bool> {
    let cfg = SbmConfig {
        n: a.n,
        num_classes: a.classes,
        p_in: a.p_in,
        p_out: a.p_out,
        feature_dim: a.dim.unwrap_or(a.classes),
        noise: a.noise,
        seed: a.seed,
        split: SplitFractions {
            train: a.train_frac,
            val: a.val_frac,
        },
    };
    let ds = gen_sbm(&cfg)?;
    save_bundle(&ds, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let expected = expected_sbm_homophily(a.n, a.classes, a.p_in, a.p_out);
    println!("nodes: {}  edges: {}", ds.num_nodes(), ds.graph.num_edges());
    match edge_homophily(&ds.graph, &ds.labels) {
        Ok(h) => println!("edge homophily: {h:.4} (expected {expected:.4})"),
        Err(_) => println!("edge homophily: undefined (no edges)"),
    }
    println!("wrote {}", a.out.display());
    Ok(true)
}

fn report_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("homophily.json")
    } else {
        out.to_path_buf()
    }
}

fn print_report(r: &HomophilyReport) {
    match r.h_hat {
        Some(h) => println!("h_hat: {h:.4}"),
        None => println!("h_hat: unavailable"),
    }
    println!("sampled edges used: {}", r.sample_size);
    if !r.skipped_edges.is_empty() {
        println!("skipped edges (no text): {}", r.skipped_edges.len());
    }
    if !r.failed_edges.is_empty() {
        println!("failed edges: {}", r.failed_edges.len());
    }
    println!(
        "tokens: {} prompt / {} completion  estimated cost: ${:.4}",
        r.usage.prompt_tokens, r.usage.completion_tokens, r.usage.cost_usd
    );
    if r.usage_missing > 0 {
        println!("warning: {} responses reported no token usage", r.usage_missing);
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<bool> {
    let ds = load_bundle(&a.data)?;
    if a.source == HomophilySource::Llm {
        check_api_key()?;
    }
    let report = resolve_homophily(&ds, &a.source, &a.estimator.settings())?;
    let path = report_path(&a.out);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    report.save(&path)?;
    print_report(&report);
    println!("wrote {}", path.display());
    Ok(report.is_complete())
}

fn check_api_key() -> Result<()> {
    if API_KEY_ENV.iter().all(|k| std::env::var(k).map_or(true, |v| v.is_empty())) {
        bail!("the llm source needs an API key in ${}", API_KEY_ENV[0]);
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<bool> {
    if a.plus && a.homophily.is_none() {
        bail!("--plus needs --homophily <source>");
    }
    if !(0.0..=1.0).contains(&a.beta) {
        bail!("--beta must lie in [0, 1]");
    }
    if a.seeds.is_empty() {
        bail!("at least one seed is required");
    }
    let ds = load_bundle(&a.data)?;
    fs::create_dir_all(&a.out)?;

    let mut h_hat = None;
    let mut h_source = None;
    if let Some(src) = &a.homophily {
        if *src == HomophilySource::Llm {
            check_api_key()?;
        }
        let report = resolve_homophily(&ds, src, &a.estimator.settings())?;
        if matches!(src, HomophilySource::Llm | HomophilySource::Mock) {
            report.save(&a.out.join("homophily.json"))?;
        }
        if !report.failed_edges.is_empty() {
            log::warn!("{} edges failed during estimation", report.failed_edges.len());
        }
        h_hat = Some(report.h_hat.context("homophily estimate unavailable")?);
        h_source = Some(src.to_string());
        println!("h_hat ({src}): {:.4}", h_hat.unwrap());
    }

    let mut spec = ModelSpec::new(a.backbone);
    spec.order = a.order;
    spec.plus = a.plus;
    spec.beta = a.beta;
    spec.hidden = vec![a.hidden, a.hidden];

    let mut accs = Vec::new();
    let mut epoch_ms = Vec::new();
    let mut total_s = Vec::new();
    for &seed in &a.seeds {
        let cfg = TrainConfig {
            epochs: a.epochs,
            learning_rate: a.lr,
            seed,
            patience: a.patience,
            ..TrainConfig::default()
        };
        let m = run_single(&ds, &spec, &cfg, h_hat, h_source.as_deref())?;
        let name = if a.seeds.len() == 1 {
            "metrics.json".to_string()
        } else {
            format!("metrics_seed{seed}.json")
        };
        m.save(&a.out.join(&name))?;
        println!(
            "seed {seed}: test_acc {:.4}  per-epoch {:.3} ms  total {:.3} s",
            m.test_accuracy, m.per_epoch_ms, m.total_s
        );
        accs.push(m.test_accuracy);
        epoch_ms.push(m.per_epoch_ms);
        total_s.push(m.total_s);
    }
    if a.seeds.len() > 1 {
        let (am, asd) = mean_std(&accs);
        let (em, _) = mean_std(&epoch_ms);
        let (tm, _) = mean_std(&total_s);
        println!(
            "{}{}: test_acc {:.2} ± {:.2}  per-epoch {em:.3} ms  total {tm:.3} s",
            a.backbone,
            if a.plus { "+" } else { "" },
            100.0 * am,
            100.0 * asd
        );
    }
    Ok(true)
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<bool> {
    let mut cfg = BenchmarkConfig::load(&a.config)?;
    if let Some(d) = a.data {
        cfg.dataset = d;
    }
    if let Some(h) = a.homophily {
        cfg.homophily = h;
    }
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(b) = a.betas {
        cfg.betas = b;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    if let Some(h) = a.hidden {
        cfg.hidden = h;
    }
    if let Some(p) = a.parallelism {
        cfg.parallelism = p;
    }
    a.estimator.apply(&mut cfg.estimator);
    if cfg.homophily == HomophilySource::Llm {
        check_api_key()?;
    }

    let outcome = run_benchmark(&cfg)?;
    write_benchmark(&a.out, &outcome)?;
    if let Some(h) = outcome.homophily.h_hat {
        println!("h_hat ({}): {h:.4}", cfg.homophily);
    }
    for s in &outcome.summaries {
        let beta = s.beta.map_or("-".to_string(), |b| format!("{b:.1}"));
        println!(
            "{:<11} plus={:<5} beta={beta:<4} acc {:.2} ± {:.2}  per-epoch {:.3} ms",
            s.backbone.name(),
            s.plus,
            100.0 * s.test_acc.0,
            100.0 * s.test_acc.1,
            s.epoch_ms.0
        );
    }
    for b in &outcome.best {
        println!("best β for {}: {:.1} ({:.2})", b.backbone, b.beta, 100.0 * b.mean);
    }
    println!("wrote {}", a.out.join("results.csv").display());
    let failures = outcome.failures();
    if failures > 0 {
        eprintln!("{failures} cells failed; see failures.csv");
        return Ok(false);
    }
    Ok(true)
}
