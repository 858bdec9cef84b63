mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;
use crate::error::CliError;

/// Prior-guided joint graphical lasso pipeline.
///
/// Every command reads and writes plain CSV/JSON files. Exit status is 0 on
/// success, 2 when a fit stops without converging and 1 on any error; errors
/// print one `error: <code>` line on stdout and the details on stderr.
#[derive(Parser, Debug)]
#[command(name = "priorglasso", version, about, long_about)]
struct Cli {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic scenarios and trials.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for candidate fits and trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    /// ℓ1 strength on the common structure.
    #[arg(long)]
    rho: Option<f64>,
    /// ℓ1 strength on the class-specific structures.
    #[arg(long)]
    gamma_s: Option<f64>,
    /// Augmented Lagrangian parameter.
    #[arg(long)]
    mu: Option<f64>,
    /// ADMM iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stop when the primal residual falls below this (with the dual one).
    #[arg(long)]
    primal_tol: Option<f64>,
    /// Stop when the dual residual falls below this (with the primal one).
    #[arg(long)]
    dual_tol: Option<f64>,
    /// Apply the ℓ1 penalty to diagonal entries too.
    #[arg(long)]
    penalize_diagonal: bool,
    /// Entries with |θ| at or below this are not edges.
    #[arg(long)]
    edge_tol: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SelectionArgs {
    /// Comma-separated sharpness candidates; must contain 0.
    #[arg(long, value_delimiter = ',')]
    k_candidates: Option<Vec<f64>>,
    /// Extended BIC γ.
    #[arg(long)]
    gamma_ebic: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct InputArgs {
    /// Observation CSV, one per class in class order (repeatable).
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    /// Input CSVs start with a header row.
    #[arg(long)]
    header: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Json,
    Graphml,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Source,
    Target,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PriorKindArg {
    Oracle,
    Noise,
    Constant,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pooled rank-to-normal transform of per-class observation CSVs.
    Gaussianize {
        #[command(flatten)]
        input: InputArgs,
        /// Directory for class_<c>.csv outputs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Per-class covariance JSON files.
    Covariance {
        #[command(flatten)]
        input: InputArgs,
        /// Inputs are already gaussianized; skip the transform.
        #[arg(long)]
        transformed: bool,
        /// Directory for cov_<c>.json outputs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Structural prior from an attention stack, optionally with weights at one k.
    Prior {
        /// JSON stack file or directory of CSV matrices.
        #[arg(long)]
        attention: PathBuf,
        /// 1-based class index recorded in the prior.
        #[arg(long, default_value_t = 1)]
        class: usize,
        /// Whether the stack's nodes are source or target tokens.
        #[arg(long, value_enum, default_value_t = ModalityArg::Source)]
        modality: ModalityArg,
        /// Prior CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write adaptive weights at this sharpness.
        #[arg(long, requires = "weights_out")]
        k: Option<f64>,
        /// Adaptive weight CSV path, written with --k.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// Choose the prior sharpness by extended BIC.
    SelectK {
        /// Covariance JSON, one per class (repeatable).
        #[arg(long = "cov", required = true)]
        covs: Vec<PathBuf>,
        /// Prior CSV, one per class (repeatable).
        #[arg(long = "prior", required = true)]
        priors: Vec<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Selection report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the selected model here.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Full pipeline: transform, covariances, optional prior selection, joint fit.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// Use precomputed covariance JSON files instead of observations.
        #[arg(long = "cov", conflicts_with = "inputs")]
        covs: Vec<PathBuf>,
        /// Prior CSV, one per class (repeatable).
        #[arg(long = "prior", conflicts_with = "attention")]
        priors: Vec<PathBuf>,
        /// Attention stack, one per class (repeatable).
        #[arg(long)]
        attention: Vec<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Receives model.json, selection.json and convergence.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score gaussianized samples against every class; emits JSON lines.
    Classify {
        /// Fitted model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Gaussianized samples, one row per sample.
        #[arg(long)]
        input: PathBuf,
        /// Input CSV starts with a header row.
        #[arg(long)]
        header: bool,
        /// Add log class frequencies to the scores.
        #[arg(long)]
        log_prior: bool,
        /// JSONL output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One round of sign-partitioned message passing over a class graph.
    MessagePass {
        /// Fitted model JSON.
        #[arg(long)]
        model: PathBuf,
        /// 1-based class whose precision defines the graph.
        #[arg(long, default_value_t = 1)]
        class: usize,
        /// Node features, one row per node.
        #[arg(long)]
        features: PathBuf,
        /// Projection applied on the positive branch (and the negative one
        /// unless --weights-neg is given).
        #[arg(long)]
        weights: PathBuf,
        /// Projection for the negative branch.
        #[arg(long)]
        weights_neg: Option<PathBuf>,
        /// Stabilizer in the branch normalizers.
        #[arg(long, default_value_t = 1e-8)]
        epsilon: f64,
        /// Feature CSV starts with a header row.
        #[arg(long)]
        header: bool,
        /// Entries with |θ| at or below this are dropped from the graph.
        #[arg(long)]
        edge_tol: Option<f64>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic common/specific scenario.
    Synth {
        /// Number of nodes.
        #[arg(long, default_value_t = 30)]
        p: usize,
        /// Number of classes.
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// Training samples per class (held-out sets match).
        #[arg(long, default_value_t = 200)]
        n_per_class: usize,
        /// Fraction of edges placed in the common layer.
        #[arg(long, default_value_t = 0.4)]
        common_ratio: f64,
        /// Expected fraction of node pairs that are edges in each class.
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        /// Scenario JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the training samples as class_<c>.csv here.
        #[arg(long)]
        samples_dir: Option<PathBuf>,
    },
    /// Score models against a scenario's ground truth.
    Eval {
        /// Scenario JSON written by synth.
        #[arg(long)]
        scenario: PathBuf,
        /// Score this model only; otherwise fit and compare the methods.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Include a joint fit with the oracle prior in the comparison.
        #[arg(long)]
        with_prior: bool,
        /// Run repeated eBIC selection trials with this kind of prior.
        #[arg(long, value_enum)]
        prior_rejection: Option<PriorKindArg>,
        /// Number of prior-rejection trials.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Receives the report, comparison and trial files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Signed edge list of a fitted model.
    ExportGraph {
        /// Fitted model JSON.
        #[arg(long)]
        model: PathBuf,
        /// common, specific:<c>, class:<c> or all.
        #[arg(long, default_value = "all")]
        layer: String,
        /// Output format.
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        /// Entries with |θ| at or below this are not edges.
        #[arg(long)]
        edge_tol: Option<f64>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    NotConverged,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(l) = &cli.log_level {
        cfg.log_level = l.clone();
    }
    let (solver, selection, input) = match &cli.command {
        Command::SelectK { solver, selection, .. } => (Some(solver), Some(selection), None),
        Command::Fit { solver, selection, input, .. } => (Some(solver), Some(selection), Some(input)),
        Command::Eval { solver, selection, .. } => (Some(solver), Some(selection), None),
        Command::Gaussianize { input, .. } | Command::Covariance { input, .. } => (None, None, Some(input)),
        _ => (None, None, None),
    };
    if let Some(s) = solver {
        let c = &mut cfg.solver;
        c.rho = s.rho.unwrap_or(c.rho);
        c.gamma_s = s.gamma_s.unwrap_or(c.gamma_s);
        c.mu = s.mu.unwrap_or(c.mu);
        c.max_iters = s.max_iters.unwrap_or(c.max_iters);
        c.primal_tol = s.primal_tol.unwrap_or(c.primal_tol);
        c.dual_tol = s.dual_tol.unwrap_or(c.dual_tol);
        c.penalize_diagonal |= s.penalize_diagonal;
        cfg.edge_tol = s.edge_tol.unwrap_or(cfg.edge_tol);
    }
    if let Some(s) = selection {
        if let Some(k) = &s.k_candidates {
            cfg.k_candidates = k.clone();
        }
        cfg.gamma_ebic = s.gamma_ebic.unwrap_or(cfg.gamma_ebic);
    }
    if let Some(i) = input {
        if !i.inputs.is_empty() {
            cfg.inputs = i.inputs.clone();
        }
        cfg.header |= i.header;
    }
    match &cli.command {
        Command::Fit { priors, attention, out_dir, .. } => {
            if !priors.is_empty() {
                cfg.priors = priors.clone();
                cfg.attention.clear();
            }
            if !attention.is_empty() {
                cfg.attention = attention.clone();
                cfg.priors.clear();
            }
            if out_dir.is_some() {
                cfg.output_dir = out_dir.clone();
            }
        }
        Command::Gaussianize { out_dir, .. } | Command::Covariance { out_dir, .. } if out_dir.is_some() => {
            cfg.output_dir = out_dir.clone();
        }
        Command::MessagePass { edge_tol: Some(t), .. } | Command::ExportGraph { edge_tol: Some(t), .. } => {
            cfg.edge_tol = *t;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_logging(level: &str) -> Result<(), CliError> {
    let filter: log::LevelFilter =
        level.parse().map_err(|_| CliError::Config(format!("unknown log level {level:?}")))?;
    env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init()
        .ok();
    Ok(())
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let cfg = build_config(&cli)?;
    init_logging(&cfg.log_level)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    use commands as c;
    match cli.command {
        Command::Gaussianize { .. } => c::gaussianize(&cfg),
        Command::Covariance { transformed, .. } => c::covariance(&cfg, transformed),
        Command::Prior { attention, class, modality, out, k, weights_out } => {
            c::prior(&attention, class, modality, out.as_deref(), k, weights_out.as_deref())
        }
        Command::SelectK { covs, priors, out, model_out, .. } => {
            c::select_k(&cfg, &covs, &priors, out.as_deref(), model_out.as_deref())
        }
        Command::Fit { covs, .. } => c::fit(&cfg, &covs),
        Command::Classify { model, input, header, log_prior, out } => {
            c::classify(&model, &input, header, log_prior, out.as_deref())
        }
        Command::MessagePass { model, class, features, weights, weights_neg, epsilon, header, out, .. } => {
            c::message_pass(&cfg, c::MessagePassArgs {
                model: &model,
                class,
                features: &features,
                weights: &weights,
                weights_neg: weights_neg.as_deref(),
                epsilon,
                header,
                out: out.as_deref(),
            })
        }
        Command::Synth { p, classes, n_per_class, common_ratio, density, out, samples_dir } => {
            let spec = priorglasso::ScenarioSpec {
                p,
                n_classes: classes,
                n_per_class,
                common_ratio,
                edge_density: density,
                seed: cfg.seed,
            };
            c::synth(spec, &out, samples_dir.as_deref())
        }
        Command::Eval { scenario, model, with_prior, prior_rejection, trials, out_dir, .. } => {
            c::eval(&cfg, &scenario, model.as_deref(), with_prior, prior_rejection, trials, &out_dir)
        }
        Command::ExportGraph { model, layer, format, out, .. } => {
            c::export_graph(&cfg, &model, &layer, format, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            println!("error: {}", e.code());
            eprintln!("priorglasso: {e}");
            if matches!(e, CliError::Core(priorglasso::Error::SelectionFailed)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
