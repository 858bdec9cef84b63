use std::fmt::Write as _;
use std::path::Path;

use priorglasso::gaussianize::{class_covariance, nonparanormal_pooled};
use priorglasso::graph::{export_edges, to_graphml, LayerSelector};
use priorglasso::inference::{threshold_support, Classifier, ClassifyOptions, MessagePassingWeights, NodeFeatures};
use priorglasso::priors::{
    aggregate_attention, ebic_score, AttentionStack, KScore, Modality, SelectionContext,
};
use priorglasso::synth::{
    compare_methods, covariances_of, prior_rejection_trial, BenchmarkSettings, PriorKind, RecoveryReport,
};
use priorglasso::{
    adaptive_weights, attention_prior, fit_joint, io, score_recovery, signed_message_passing, AdaptiveWeightMatrix,
    ClassCovariance, Error, JointModel, ObservationMatrix, PriorMatrix, ScenarioSpec, SyntheticScenario,
};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::output::{emit, write_atomic, write_json};
use crate::{GraphFormat, ModalityArg, PriorKindArg, Status};

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn require_out_dir(cfg: &PipelineConfig) -> Result<&Path, CliError> {
    cfg.output_dir
        .as_deref()
        .ok_or_else(|| CliError::Usage("an output directory is required (--out-dir or output_dir)".into()))
}

fn read_classes(cfg: &PipelineConfig) -> Result<Vec<ObservationMatrix>, CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Usage("at least one --input CSV is required".into()));
    }
    cfg.inputs
        .iter()
        .enumerate()
        .map(|(c, path)| {
            let data = io::read_csv_matrix_file(path, cfg.header)?;
            Ok(ObservationMatrix::new(data, c + 1)?)
        })
        .collect()
}

pub fn load_model(path: &Path) -> Result<JointModel, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Core(Error::Format(format!("{}: {e}", path.display()))))
}

fn load_covariances(paths: &[impl AsRef<Path>]) -> Result<Vec<ClassCovariance>, CliError> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Core(Error::Format(format!("{}: {e}", p.display()))))
        })
        .collect()
}

fn load_priors(paths: &[impl AsRef<Path>]) -> Result<Vec<PriorMatrix>, CliError> {
    paths
        .iter()
        .enumerate()
        .map(|(c, p)| Ok(PriorMatrix::from_values(io::read_csv_matrix_file(p.as_ref(), false)?, c + 1)?))
        .collect()
}

fn prior_from_attention(path: &Path, class: usize, modality: Modality) -> Result<PriorMatrix, CliError> {
    let stack: AttentionStack = io::read_attention_stack(path, class, modality)?;
    Ok(attention_prior(&aggregate_attention(&stack)?, class)?)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

pub fn gaussianize(cfg: &PipelineConfig) -> Result<Status, CliError> {
    let out_dir = require_out_dir(cfg)?;
    let classes = read_classes(cfg)?;
    for g in nonparanormal_pooled(&classes)? {
        if !g.degenerate_columns.is_empty() {
            log::warn!("class {}: constant columns {:?}", g.matrix.class_id(), g.degenerate_columns);
        }
        let path = out_dir.join(format!("class_{}.csv", g.matrix.class_id()));
        write_atomic(&path, io::csv_matrix_string(g.matrix.data()).as_bytes())?;
    }
    Ok(Status::Ok)
}

pub fn covariance(cfg: &PipelineConfig, transformed: bool) -> Result<Status, CliError> {
    let out_dir = require_out_dir(cfg)?;
    let classes = read_classes(cfg)?;
    let covs = if transformed {
        classes
            .into_iter()
            .map(|o| class_covariance(&ObservationMatrix::gaussian(o.data().clone(), o.class_id())?))
            .collect::<priorglasso::Result<Vec<_>>>()?
    } else {
        covariances_of(&classes)?
    };
    for cov in covs {
        write_json(&out_dir.join(format!("cov_{}.json", cov.class_id)), &to_value(&cov)?)?;
    }
    Ok(Status::Ok)
}

pub fn prior(
    attention: &Path,
    class: usize,
    modality: ModalityArg,
    out: Option<&Path>,
    k: Option<f64>,
    weights_out: Option<&Path>,
) -> Result<Status, CliError> {
    let modality = match modality {
        ModalityArg::Source => Modality::Source,
        ModalityArg::Target => Modality::Target,
    };
    let prior = prior_from_attention(attention, class, modality)?;
    if let (Some(k), Some(path)) = (k, weights_out) {
        let w = adaptive_weights(&prior, k)?;
        write_atomic(path, io::csv_matrix_string(w.w_tilde()).as_bytes())?;
    }
    emit(out, &io::csv_matrix_string(prior.values()))?;
    Ok(Status::Ok)
}

pub fn select_k(
    cfg: &PipelineConfig,
    cov_paths: &[impl AsRef<Path>],
    prior_paths: &[impl AsRef<Path>],
    out: Option<&Path>,
    model_out: Option<&Path>,
) -> Result<Status, CliError> {
    let covs = load_covariances(cov_paths)?;
    let priors = load_priors(prior_paths)?;
    let report = priorglasso::select_k(
        &cfg.k_candidates,
        &SelectionContext {
            covs: &covs,
            priors: &priors,
            config: cfg.solver,
            gamma_ebic: cfg.gamma_ebic,
            edge_tol: cfg.edge_tol,
        },
    )?;
    if let Some(path) = model_out {
        write_json(path, &to_value(&report.model)?)?;
    }
    let mut text = serde_json::to_string_pretty(&report.to_json()).map_err(Error::from)?;
    text.push('\n');
    emit(out, &text)?;
    Ok(Status::Ok)
}

fn convergence_csv(model: &JointModel) -> String {
    let r = &model.residuals;
    let mut s = String::from("iteration,primal,dual,objective\n");
    for (i, ((p, d), o)) in r.primal_history.iter().zip(&r.dual_history).zip(&r.objective_history).enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, io::format_f64(*p), io::format_f64(*d), io::format_f64(*o));
    }
    s
}

/// The model and selection report `fit` would produce for these inputs.
pub fn fit_model(
    cfg: &PipelineConfig,
    covs: &[ClassCovariance],
    priors: Option<&[PriorMatrix]>,
) -> Result<(JointModel, serde_json::Value), CliError> {
    match priors {
        Some(priors) => {
            if priors.len() != covs.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} priors for {} classes",
                    priors.len(),
                    covs.len()
                ))
                .into());
            }
            let report = priorglasso::select_k(
                &cfg.k_candidates,
                &SelectionContext {
                    covs,
                    priors,
                    config: cfg.solver,
                    gamma_ebic: cfg.gamma_ebic,
                    edge_tol: cfg.edge_tol,
                },
            )?;
            let json = report.to_json();
            Ok((report.model, json))
        }
        None => {
            let p = covs.first().map_or(0, ClassCovariance::p);
            let weights: Vec<_> = covs.iter().map(|_| AdaptiveWeightMatrix::uniform(p)).collect();
            let mut model = fit_joint(covs, &weights, &cfg.solver)?;
            model.k_star = Some(0.0);
            let score = ebic_score(&model, covs, cfg.gamma_ebic, cfg.edge_tol)?;
            let scores = [KScore { k: 0.0, ebic: score.ebic, edges: score.edges }];
            Ok((model, json!({ "k_star": 0.0, "scores": scores, "skipped": [] })))
        }
    }
}

pub fn fit(cfg: &PipelineConfig, cov_paths: &[impl AsRef<Path>]) -> Result<Status, CliError> {
    let out_dir = require_out_dir(cfg)?;
    let covs = if cov_paths.is_empty() {
        covariances_of(&read_classes(cfg)?)?
    } else {
        load_covariances(cov_paths)?
    };
    let priors = if !cfg.priors.is_empty() {
        Some(load_priors(&cfg.priors)?)
    } else if !cfg.attention.is_empty() {
        Some(
            cfg.attention
                .iter()
                .enumerate()
                .map(|(c, p)| prior_from_attention(p, c + 1, Modality::Source))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    let (model, selection) = fit_model(cfg, &covs, priors.as_deref())?;
    write_json(&out_dir.join("model.json"), &to_value(&model)?)?;
    write_json(&out_dir.join("selection.json"), &selection)?;
    write_atomic(&out_dir.join("convergence.csv"), convergence_csv(&model).as_bytes())?;
    if model.converged {
        Ok(Status::Ok)
    } else {
        log::warn!("fit stopped after {} iterations without converging", model.iterations);
        Ok(Status::NotConverged)
    }
}

pub fn classify(
    model_path: &Path,
    input: &Path,
    header: bool,
    log_prior: bool,
    out: Option<&Path>,
) -> Result<Status, CliError> {
    let model = load_model(model_path)?;
    let samples = io::read_csv_matrix_file(input, header)?;
    let classifier = Classifier::new(&model, ClassifyOptions { log_prior })?;
    let mut text = String::new();
    for i in 0..samples.nrows() {
        let z = samples.row(i).transpose();
        let r = classifier.classify(&z)?;
        let line = json!({ "sample": i, "scores": r.scores, "predicted": r.predicted + 1 });
        let _ = writeln!(text, "{line}");
    }
    emit(out, &text)?;
    Ok(Status::Ok)
}

pub struct MessagePassArgs<'a> {
    pub model: &'a Path,
    pub class: usize,
    pub features: &'a Path,
    pub weights: &'a Path,
    pub weights_neg: Option<&'a Path>,
    pub epsilon: f64,
    pub header: bool,
    pub out: Option<&'a Path>,
}

pub fn message_pass(cfg: &PipelineConfig, args: MessagePassArgs<'_>) -> Result<Status, CliError> {
    let model = load_model(args.model)?;
    if args.class == 0 || args.class > model.n_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {} out of range 1..={}",
            args.class,
            model.n_classes()
        ))
        .into());
    }
    let theta = threshold_support(&model.theta_hat[args.class - 1], cfg.edge_tol);
    let nodes = NodeFeatures::new(io::read_csv_matrix_file(args.features, args.header)?)?;
    let w_pos = io::read_csv_matrix_file(args.weights, false)?;
    let w_neg = match args.weights_neg {
        Some(p) => io::read_csv_matrix_file(p, false)?,
        None => w_pos.clone(),
    };
    let weights = MessagePassingWeights::new(w_pos, w_neg, args.epsilon)?;
    let h = signed_message_passing(&theta, &nodes, &weights)?;
    emit(args.out, &io::csv_matrix_string(&h))?;
    Ok(Status::Ok)
}

pub fn synth(spec: ScenarioSpec, out: &Path, samples_dir: Option<&Path>) -> Result<Status, CliError> {
    let scenario = priorglasso::generate_scenario(spec)?;
    write_json(out, &scenario.to_json())?;
    if let Some(dir) = samples_dir {
        for obs in &scenario.samples {
            let path = dir.join(format!("class_{}.csv", obs.class_id()));
            write_atomic(&path, io::csv_matrix_string(obs.data()).as_bytes())?;
        }
    }
    Ok(Status::Ok)
}

fn settings(cfg: &PipelineConfig, with_prior: bool) -> BenchmarkSettings {
    BenchmarkSettings {
        config: cfg.solver,
        edge_tol: cfg.edge_tol,
        gamma_ebic: cfg.gamma_ebic,
        k_candidates: with_prior.then(|| cfg.k_candidates.clone()),
    }
}

fn report_csv(rows: &[(&str, &RecoveryReport)], seed: u64) -> String {
    let mut s = format!("{}\n", RecoveryReport::CSV_HEADER);
    for (method, r) in rows {
        s.push_str(&r.csv_row(method, seed));
        s.push('\n');
    }
    s
}

pub fn eval(
    cfg: &PipelineConfig,
    scenario_path: &Path,
    model_path: Option<&Path>,
    with_prior: bool,
    prior_rejection: Option<PriorKindArg>,
    trials: usize,
    out_dir: &Path,
) -> Result<Status, CliError> {
    let value: serde_json::Value = serde_json::from_str(&read_text(scenario_path)?).map_err(Error::from)?;
    let scenario = SyntheticScenario::from_json(&value)?;
    let seed = scenario.spec.seed;
    match model_path {
        Some(path) => {
            let report = score_recovery(&scenario, &load_model(path)?, cfg.edge_tol)?;
            write_json(&out_dir.join("report.json"), &to_value(&report)?)?;
            write_atomic(&out_dir.join("report.csv"), report_csv(&[("model", &report)], seed).as_bytes())?;
        }
        None => {
            let cmp = compare_methods(&scenario, &settings(cfg, with_prior))?;
            let mut rows = vec![("independent", &cmp.independent), ("joint", &cmp.joint)];
            if let Some(r) = &cmp.joint_prior {
                rows.push(("joint_prior", r));
            }
            let table = json!({
                "seed": seed,
                "independent": to_value(&cmp.independent)?,
                "joint": to_value(&cmp.joint)?,
                "joint_prior": cmp.joint_prior.as_ref().map(to_value).transpose()?,
            });
            write_json(&out_dir.join("comparison.json"), &table)?;
            write_atomic(&out_dir.join("comparison.csv"), report_csv(&rows, seed).as_bytes())?;
        }
    }
    if let Some(kind) = prior_rejection {
        let kind = match kind {
            PriorKindArg::Oracle => PriorKind::Oracle,
            PriorKindArg::Noise => PriorKind::Noise,
            PriorKindArg::Constant => PriorKind::Constant,
        };
        let stats = prior_rejection_trial(scenario.spec, trials, &cfg.k_candidates, kind, &settings(cfg, false))?;
        write_json(&out_dir.join("rejection.json"), &to_value(&stats)?)?;
    }
    Ok(Status::Ok)
}

pub fn export_graph(
    cfg: &PipelineConfig,
    model_path: &Path,
    layer: &str,
    format: GraphFormat,
    out: Option<&Path>,
) -> Result<Status, CliError> {
    let selector: LayerSelector = layer.parse()?;
    let model = load_model(model_path)?;
    let edges = export_edges(&model, selector, cfg.edge_tol)?;
    let text = match format {
        GraphFormat::Json => {
            let mut t = serde_json::to_string_pretty(&edges).map_err(Error::from)?;
            t.push('\n');
            t
        }
        GraphFormat::Graphml => to_graphml(model.p(), &edges),
    };
    emit(out, &text)?;
    Ok(Status::Ok)
}
