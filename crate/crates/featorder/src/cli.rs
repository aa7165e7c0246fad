//! Argument parsing and the `analyze`, `order` and `train` commands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use featorder_core::cluster::kmeans;
use featorder_core::dataset::{apply_permutation, standardize};
use featorder_core::foe::{self, DEFAULT_SENSITIVITY, DEFAULT_THRESHOLDS};
use featorder_core::fusion::{self, FitConfig, ImportanceScores, LossMode, TaskLoss};
use featorder_core::global::coherence_penalty;
use featorder_core::graph::{EdgeMetric, DEFAULT_KL_BINS};
use featorder_core::pipeline::{order_features, OrderingConfig};
use featorder_core::rewiring::{Centrality, Direction, RewiringConfig};
use featorder_core::{DataMatrix, Error as CoreError, Permutation, Task};

use crate::error::{CliError, Result};
use crate::io::{load_csv, read_to_string, write_atomic, LoadOptions, Loaded};
use crate::report::{
    blocks_of, edge_list, loss_trace, rewiring_trace, to_json, AnalyzeReport, Checkpoint, DimsJson, FoeSummary,
    LossJson, PermutationFile, TrainingJson, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};

#[derive(Debug, Parser)]
#[command(name = "featorder", version, about = "Decide whether to reorder tabular features, compute an order, train on it")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Intrinsic-dimensionality report and reordering verdict per dataset.
    Analyze(AnalyzeArgs),
    /// Compute a global feature permutation.
    Order(OrderArgs),
    /// Train the order-aware network on a permutation.
    Train(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Kl,
    Euclidean,
    Manhattan,
    Variance,
    Correlation,
}

impl From<MetricArg> for EdgeMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Kl => EdgeMetric::Kl,
            MetricArg::Euclidean => EdgeMetric::Euclidean,
            MetricArg::Manhattan => EdgeMetric::Manhattan,
            MetricArg::Variance => EdgeMetric::Variance,
            MetricArg::Correlation => EdgeMetric::Correlation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CentralityArg {
    Degree,
    Betweenness,
    Eigenvector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Dfo,
    Dispersion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Binary,
    Multiclass,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Headed CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Label column, excluded from the features.
    #[arg(long)]
    pub label: Option<String>,
    /// Override the task inferred from the labels.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Drop rows with missing cells instead of failing.
    #[arg(long)]
    pub drop_missing: bool,
}

impl InputArgs {
    fn load(&self) -> Result<Loaded> {
        load_csv(&self.input, &load_options(self.label.clone(), self.task, self.drop_missing))
    }
}

fn load_options(label: Option<String>, task: Option<TaskArg>, drop_missing: bool) -> LoadOptions {
    let task = task.map(|t| match t {
        TaskArg::Binary => Task::Binary,
        TaskArg::Multiclass => Task::Multiclass,
        TaskArg::Regression => Task::Regression,
    });
    LoadOptions { label, task, drop_missing }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// One or more headed CSV files; several are ranked by FOE.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Label column to exclude: one name for every input, or one per input.
    #[arg(long, num_args = 1..)]
    pub label: Vec<String>,
    #[arg(long)]
    pub drop_missing: bool,
    /// Cumulative-variance thresholds.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS.to_vec())]
    pub thresholds: Vec<f64>,
    /// Sensitivity exponent of the FOE score.
    #[arg(long, default_value_t = DEFAULT_SENSITIVITY)]
    pub sensitivity: f64,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct OrderingArgs {
    #[arg(long, default_value_t = 12)]
    pub clusters: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = DEFAULT_KL_BINS)]
    pub kl_bins: usize,
    /// Direction of the global order.
    #[arg(long, value_enum, default_value_t = DirectionArg::Desc)]
    pub direction: DirectionArg,
    /// Rewiring stops once the change in quality falls below this.
    #[arg(long, default_value_t = 0.021)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.2)]
    pub mutation_prob: f64,
    /// Pruning threshold on affinity weights.
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    /// Hebbian learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub decay: f64,
    #[arg(long, value_enum, default_value_t = CentralityArg::Degree)]
    pub centrality: CentralityArg,
    #[arg(long, default_value_t = 20)]
    pub max_rounds: usize,
    /// Fraction of vertices treated as hubs when rewiring.
    #[arg(long, default_value_t = 0.25)]
    pub hub_fraction: f64,
    /// Skip the adjacent-swap refinement of each re-ordering.
    #[arg(long)]
    pub no_local_search: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl OrderingArgs {
    pub fn config(&self) -> OrderingConfig {
        OrderingConfig {
            clusters: self.clusters,
            metric: self.metric.into(),
            kl_bins: self.kl_bins,
            direction: match self.direction {
                DirectionArg::Asc => Direction::Ascending,
                DirectionArg::Desc => Direction::Descending,
            },
            rewiring: RewiringConfig {
                centrality: match self.centrality {
                    CentralityArg::Degree => Centrality::Degree,
                    CentralityArg::Betweenness => Centrality::Betweenness,
                    CentralityArg::Eigenvector => Centrality::Eigenvector,
                },
                learning_rate: self.lambda,
                decay: self.decay,
                prune_theta: self.theta,
                tolerance: self.tolerance,
                mutation_prob: self.mutation_prob,
                max_rounds: self.max_rounds,
                seed: self.seed,
                hub_fraction: self.hub_fraction,
                direction: Direction::Ascending,
                local_search: !self.no_local_search,
            },
            seed: self.seed,
            ..OrderingConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OrderArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub ordering: OrderingArgs,
    /// Permutation file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Per-round rewiring trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Measured per-cluster graphs as an edge list.
    #[arg(long)]
    pub graph_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub ordering: OrderingArgs,
    /// Precomputed permutation (JSON or one-column CSV); computed when absent.
    #[arg(long)]
    pub permutation: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LossArg::Dfo)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 0.4)]
    pub lambda_d: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lambda_g: f64,
    #[arg(long, default_value_t = 0.4)]
    pub lambda_reg: f64,
    /// Per-class loss weights, comma separated, in class-id order.
    #[arg(long, value_delimiter = ',')]
    pub class_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Token width.
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    /// Attention key width.
    #[arg(long, default_value_t = 8)]
    pub dk: usize,
    /// Attention window; full causal when absent.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// Checkpoint file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace CSV; `<out>.trace.csv` when absent.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => analyze(&a),
        Command::Order(a) => order(&a),
        Command::Train(a) => train(&a),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn zero_variance_names(z: &DataMatrix) -> Vec<String> {
    z.column_names().iter().zip(z.zero_variance()).filter(|(_, &f)| f).map(|(n, _)| n.clone()).collect()
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn analyze(a: &AnalyzeArgs) -> Result<()> {
    if a.label.len() > 1 && a.label.len() != a.input.len() {
        return Err(CliError::Usage(format!("{} label names for {} inputs", a.label.len(), a.input.len())));
    }
    let mut rows = Vec::with_capacity(a.input.len());
    for (i, path) in a.input.iter().enumerate() {
        let label = a.label.get(i).or(a.label.first()).cloned();
        let loaded = load_csv(path, &load_options(label, None, a.drop_missing))?;
        let z = standardize(&loaded.data);
        let report = foe::analyze(&z, &a.thresholds, a.sensitivity)?;
        let summary = FoeSummary::new(dataset_name(path), z.n(), zero_variance_names(&z), &report);
        rows.push((report.foe, summary));
    }
    rows.sort_by(|x, y| x.0.rank_cmp(&y.0));
    let datasets: Vec<FoeSummary> =
        rows.into_iter().enumerate().map(|(i, (_, s))| FoeSummary { rank: i + 1, ..s }).collect();
    let report = AnalyzeReport { datasets };
    let text = match a.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    emit(a.out.as_deref(), &text)?;
    for d in &report.datasets {
        if a.out.is_some() {
            println!("{}", d.verdict());
        } else {
            eprintln!("{}", d.verdict());
        }
    }
    Ok(())
}

pub fn order(a: &OrderArgs) -> Result<()> {
    let loaded = a.input.load()?;
    let x = &loaded.data;
    let result = order_features(x, &a.ordering.config())?;
    let global = &result.global;
    let names = x.column_names();
    let file = PermutationFile {
        order: global.order.sequence().to_vec(),
        column_names: global.order.sequence().iter().map(|&f| names[f].clone()).collect(),
        score: Some(global.score),
        rank_score: Some(global.rank_score),
        alphas: global.alphas.alphas.clone(),
        importance: result.importance.gamma.clone(),
        coherence_penalty: Some(result.coherence),
        local_quality: global.local.iter().map(|l| l.quality()).collect(),
    };
    let text = match a.format {
        Format::Json => to_json(&file)?,
        Format::Csv => file.to_csv()?,
    };
    emit(a.out.as_deref(), &text)?;
    if let Some(p) = &a.trace {
        write_atomic(p, rewiring_trace(&global.local)?.as_bytes())?;
    }
    if let Some(p) = &a.graph_dump {
        write_atomic(p, edge_list(&result.graphs)?.as_bytes())?;
    }
    eprintln!("ordered {} features over {} clusters, dispersion {}", x.m(), a.ordering.clusters, global.score);
    Ok(())
}

fn column_stats(x: &DataMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.n() as f64;
    (0..x.m())
        .map(|j| {
            let c = x.column(j);
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        })
        .unzip()
}

/// Permutation, importance and coherence penalty for training.
fn ordering_for_training(a: &TrainArgs, x: &DataMatrix) -> Result<(Permutation, ImportanceScores, f64)> {
    let m = x.m();
    let Some(path) = &a.permutation else {
        let r = order_features(x, &a.ordering.config())?;
        return Ok((r.global.order, r.importance, r.coherence));
    };
    let file = PermutationFile::parse(path, &read_to_string(path)?)?;
    let order = file.permutation(path)?;
    if order.len() != m {
        return Err(CliError::Format {
            path: path.clone(),
            message: format!("permutation has {} entries for {} features", order.len(), m),
        });
    }
    let gamma = if file.importance.len() == m { file.importance } else { vec![1.0; m] };
    let coherence = match file.coherence_penalty {
        Some(c) => c,
        None => {
            let z = standardize(x);
            let k = a.ordering.clusters.min(x.n());
            let assign = kmeans(z.values(), k, a.ordering.seed, OrderingConfig::default().kmeans_max_iters)?;
            coherence_penalty(&order, &assign.centroids.transpose(), OrderingConfig::default().coherence_eps)?
        }
    };
    Ok((order, ImportanceScores { gamma }, coherence))
}

fn default_trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".trace.csv");
    PathBuf::from(s)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let loaded = a.input.load()?;
    let x = &loaded.data;
    let task = fusion::task_loss_for(x.task())?;
    let (order, gamma, p_g) = ordering_for_training(a, x)?;

    let mut cfg = FitConfig::new(task);
    cfg.d = a.d;
    cfg.dk = a.dk;
    cfg.window = a.window;
    cfg.epochs = a.epochs;
    cfg.lr = a.lr;
    cfg.seed = a.ordering.seed;
    cfg.init_scale = a.init_scale;
    cfg.loss.mode = match a.loss {
        LossArg::Dfo => LossMode::Dfo,
        LossArg::Dispersion => LossMode::Dispersion,
    };
    cfg.loss.lambda_d = a.lambda_d;
    cfg.loss.lambda_g = a.lambda_g;
    cfg.loss.lambda_reg = a.lambda_reg;
    cfg.loss.class_weights = a.class_weights.clone();

    let z = standardize(x);
    let model = fusion::fit(&z, &order, &gamma, p_g, &cfg)?;
    let reordered = apply_permutation(&z, &order)?;
    let labels = z.labels().ok_or(CoreError::UnlabeledData)?;
    let (metric, value) = match task {
        TaskLoss::Mse => {
            let pred = fusion::predict(reordered.values(), &model.layout, &model.params, task)?;
            let mse = pred.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / labels.len() as f64;
            ("mse", mse)
        }
        _ => ("accuracy", fusion::accuracy(reordered.values(), labels, &model.layout, &model.params, task)?),
    };

    let (means, scales) = column_stats(x);
    let dims = model.params.dims();
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        dims: DimsJson { m: dims.m, d: dims.d, dk: dims.dk, outputs: dims.outputs },
        loss: LossJson {
            task: match task {
                TaskLoss::Bce => "bce",
                TaskLoss::Cce => "cce",
                TaskLoss::Mse => "mse",
            }
            .into(),
            mode: match cfg.loss.mode {
                LossMode::Dfo => "dfo",
                LossMode::Dispersion => "dispersion",
            }
            .into(),
            lambda_d: cfg.loss.lambda_d,
            lambda_g: cfg.loss.lambda_g,
            lambda_reg: cfg.loss.lambda_reg,
            class_weights: cfg.loss.class_weights.clone(),
        },
        training: TrainingJson { epochs: cfg.epochs, lr: cfg.lr, seed: cfg.seed, init_scale: cfg.init_scale, window: cfg.window },
        column_names: x.column_names().to_vec(),
        classes: loaded.classes.clone(),
        means,
        scales,
        order: order.sequence().to_vec(),
        gamma: gamma.gamma.clone(),
        coherence_penalty: p_g,
        final_loss: model.final_loss(),
        train_metric: metric.into(),
        train_metric_value: value,
        blocks: blocks_of(&model.params),
    };
    write_atomic(&a.out, to_json(&ck)?.as_bytes())?;
    let trace_path = a.trace.clone().unwrap_or_else(|| default_trace_path(&a.out));
    write_atomic(&trace_path, loss_trace(&model.trace)?.as_bytes())?;
    println!("trained {} epochs: training {metric} {value:.6}", cfg.epochs);
    Ok(())
}
