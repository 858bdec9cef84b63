//! Synthetic common/specific precision structures with known ground truth,
//! and the scoring used to benchmark recovery against them.
//!
//! All randomness flows from one seed through ChaCha20 streams: stream 0
//! draws the structure, stream `1 + c` the training samples of class `c`,
//! and `HELDOUT_STREAM + c` the held-out draws. Regenerating from the same
//! `ScenarioSpec` is bit-identical.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::admm::{common_specific_ratio, fit_joint, JointModel, SolverConfig};
use crate::error::{Error, Result};
use crate::gaussianize::{class_covariance, nonparanormal_pooled, ClassCovariance, ObservationMatrix};
use crate::glasso::reference_glasso;
use crate::linalg;
use crate::priors::{select_k, AdaptiveWeightMatrix, PriorMatrix, SelectionContext};

pub const GENERATOR: &str = "rand_chacha::ChaCha20Rng/seed_from_u64+rand_distr::StandardNormal";

const STRUCTURE_STREAM: u64 = 0;
const HELDOUT_STREAM: u64 = 1 << 32;
const TRIAL_STREAM: u64 = 1 << 33;
const PRIOR_STREAM: u64 = 1 << 34;
const MIN_EIGENVALUE: f64 = 0.1;
const EDGE_MAGNITUDE: (f64, f64) = (0.2, 0.6);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub p: usize,
    pub n_classes: usize,
    pub n_per_class: usize,
    pub common_ratio: f64,
    pub edge_density: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self { p: 30, n_classes: 4, n_per_class: 200, common_ratio: 0.4, edge_density: 0.1, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub spec: ScenarioSpec,
    pub theta_com_true: DMatrix<f64>,
    pub s_true: Vec<DMatrix<f64>>,
    pub theta_true: Vec<DMatrix<f64>>,
    pub samples: Vec<ObservationMatrix>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` rows from N(0, Θ⁻¹) using the Cholesky factor of the covariance.
pub fn sample_gaussian(theta: &DMatrix<f64>, n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let p = theta.nrows();
    let chol_theta = Cholesky::new(theta.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("sampling precision".into()))?;
    let sigma = linalg::symmetrize(&chol_theta.inverse());
    let l = Cholesky::new(sigma)
        .ok_or_else(|| Error::NotPositiveDefinite("sampling covariance".into()))?
        .unpack();
    let mut out = DMatrix::zeros(n, p);
    let mut eps = nalgebra::DVector::zeros(p);
    for r in 0..n {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let x = &l * &eps;
        out.row_mut(r).copy_from(&x.transpose());
    }
    Ok(out)
}

pub fn generate_scenario(spec: ScenarioSpec) -> Result<SyntheticScenario> {
    let ScenarioSpec { p, n_classes, n_per_class, common_ratio, edge_density, seed } = spec;
    if p < 2 {
        return Err(Error::InfeasibleScenario(format!("need p >= 2, got {p}")));
    }
    if n_classes == 0 {
        return Err(Error::InfeasibleScenario("need at least one class".into()));
    }
    if n_per_class < 2 {
        return Err(Error::InfeasibleScenario("need at least two samples per class".into()));
    }
    if !(0.0..=1.0).contains(&common_ratio) || !(0.0..=1.0).contains(&edge_density) {
        return Err(Error::InfeasibleScenario(
            "common_ratio and edge_density must lie in [0, 1]".into(),
        ));
    }
    let pairs_total = p * (p - 1) / 2;
    let e_total = (edge_density * pairs_total as f64).round() as usize;
    let n_common = (common_ratio * e_total as f64).round() as usize;
    let n_specific = e_total - n_common;
    if e_total > pairs_total {
        return Err(Error::InfeasibleScenario(format!(
            "{e_total} disjoint edges requested but only {pairs_total} node pairs exist"
        )));
    }

    let mut rng = rng_for(seed, STRUCTURE_STREAM);
    let mut pairs: Vec<(usize, usize)> =
        (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut rng);

    let draw_weight = |rng: &mut ChaCha20Rng| {
        let mag = rng.random_range(EDGE_MAGNITUDE.0..EDGE_MAGNITUDE.1);
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let mut theta_com = DMatrix::identity(p, p);
    for &(i, j) in &pairs[..n_common] {
        let v = draw_weight(&mut rng);
        theta_com[(i, j)] = v;
        theta_com[(j, i)] = v;
    }
    let mut s_true = vec![DMatrix::zeros(p, p); n_classes];
    let mut cursor = n_common;
    for (c, s) in s_true.iter_mut().enumerate() {
        // Spread the specific edges as evenly as possible, earlier classes first.
        let count = n_specific / n_classes + usize::from(c < n_specific % n_classes);
        for &(i, j) in &pairs[cursor..cursor + count] {
            let v = draw_weight(&mut rng);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
        cursor += count;
    }

    let min_eig = s_true
        .iter()
        .map(|s| linalg::min_eigenvalue(&(&theta_com + s)))
        .fold(f64::INFINITY, f64::min);
    if min_eig < MIN_EIGENVALUE {
        let lift = MIN_EIGENVALUE - min_eig + 1e-9;
        for i in 0..p {
            theta_com[(i, i)] += lift;
        }
    }
    let theta_true: Vec<DMatrix<f64>> = s_true.iter().map(|s| &theta_com + s).collect();

    let samples = theta_true
        .iter()
        .enumerate()
        .map(|(c, theta)| {
            let mut rng = rng_for(seed, 1 + c as u64);
            ObservationMatrix::new(sample_gaussian(theta, n_per_class, &mut rng)?, c + 1)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticScenario { spec, theta_com_true: theta_com, s_true, theta_true, samples })
}

impl SyntheticScenario {
    pub fn p(&self) -> usize {
        self.spec.p
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    /// Pooled nonparanormal transform followed by per-class covariances.
    pub fn class_covariances(&self) -> Result<Vec<ClassCovariance>> {
        covariances_of(&self.samples)
    }

    /// Fresh draws from the same model on the held-out streams.
    pub fn heldout_samples(&self) -> Result<Vec<ObservationMatrix>> {
        self.theta_true
            .iter()
            .enumerate()
            .map(|(c, theta)| {
                let mut rng = rng_for(self.spec.seed, HELDOUT_STREAM + c as u64);
                ObservationMatrix::new(sample_gaussian(theta, self.spec.n_per_class, &mut rng)?, c + 1)
            })
            .collect()
    }

    pub fn heldout_covariances(&self) -> Result<Vec<ClassCovariance>> {
        covariances_of(&self.heldout_samples()?)
    }

    /// Ground-truth share of edges in the common layer.
    pub fn target_common_ratio(&self) -> f64 {
        let common = linalg::count_edges(&self.theta_com_true, 0.0);
        let specific: usize = self.s_true.iter().map(|s| linalg::count_edges(s, 0.0)).sum();
        if common + specific == 0 {
            0.0
        } else {
            common as f64 / (common + specific) as f64
        }
    }

    /// Oracle prior for class `c`: 0.9 on the true specific support, 0.1 on
    /// every other off-diagonal pair, unit diagonal.
    pub fn oracle_prior(&self, c: usize) -> PriorMatrix {
        let p = self.p();
        let s = &self.s_true[c];
        let w = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else if s[(i, j)] != 0.0 {
                0.9
            } else {
                0.1
            }
        });
        PriorMatrix::from_values(w, c + 1).expect("oracle prior is symmetric")
    }

    /// Independent uniform(0, 1) symmetric prior with unit diagonal.
    pub fn noise_prior(&self, c: usize, seed: u64) -> PriorMatrix {
        let p = self.p();
        let mut rng = rng_for(seed, PRIOR_STREAM + c as u64);
        let mut w = DMatrix::identity(p, p);
        for i in 0..p {
            for j in (i + 1)..p {
                let v: f64 = rng.random();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        PriorMatrix::from_values(w, c + 1).expect("noise prior is symmetric")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "generator": GENERATOR,
            "spec": self.spec,
            "theta_com_true": linalg::to_rows(&self.theta_com_true),
            "s_true": self.s_true.iter().map(linalg::to_rows).collect::<Vec<_>>(),
            "theta_true": self.theta_true.iter().map(linalg::to_rows).collect::<Vec<_>>(),
            "samples": self.samples.iter().map(|o| linalg::to_rows(o.data())).collect::<Vec<_>>(),
        })
    }

    /// Reads a scenario file. The structure is taken from the file; its
    /// `ScenarioSpec` must regenerate it exactly, otherwise the file is rejected.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_value(
            value.get("spec").cloned().ok_or_else(|| Error::Format("scenario missing spec".into()))?,
        )?;
        let regenerated = generate_scenario(spec)?;
        let stored: Vec<Vec<f64>> = serde_json::from_value(
            value
                .get("theta_com_true")
                .cloned()
                .ok_or_else(|| Error::Format("scenario missing theta_com_true".into()))?,
        )?;
        if linalg::from_rows(&stored)? != regenerated.theta_com_true {
            return Err(Error::Format(
                "scenario file does not match its spec under this generator".into(),
            ));
        }
        Ok(regenerated)
    }
}

pub fn covariances_of(samples: &[ObservationMatrix]) -> Result<Vec<ClassCovariance>> {
    nonparanormal_pooled(samples)?
        .iter()
        .map(|g| class_covariance(&g.matrix))
        .collect()
}

/// Edge-support confusion counts for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LayerScore {
    /// Empty prediction scores precision 1, empty truth scores recall 1, and
    /// F1 = 2tp / (2tp + fp + fn) with the empty-vs-empty case defined as 1.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        Self {
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
        }
    }

    fn compare(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, edge_tol: f64) -> (usize, usize, usize) {
        let p = truth.nrows();
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for i in 0..p {
            for j in (i + 1)..p {
                match (estimate[(i, j)].abs() > edge_tol, truth[(i, j)] != 0.0) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        (tp, fp, fn_)
    }

    pub fn of(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, edge_tol: f64) -> Self {
        let (tp, fp, fn_) = Self::compare(estimate, truth, edge_tol);
        Self::from_counts(tp, fp, fn_)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub common: LayerScore,
    pub specific: Vec<LayerScore>,
    /// Counts pooled over the specific layers of every class.
    pub specific_pooled: LayerScore,
    /// Full per-class precision support, pooled over classes.
    pub combined: LayerScore,
    pub csr_estimated: f64,
    pub csr_target: f64,
    pub train_nll: Vec<f64>,
    pub heldout_nll: Vec<f64>,
    /// Mean held-out minus mean training NLL; a stand-in generalization gap.
    pub nll_gap: f64,
    pub k_star: Option<f64>,
}

impl RecoveryReport {
    pub const CSV_HEADER: &'static str = "method,seed,common_f1,specific_f1,combined_precision,combined_recall,combined_f1,csr_estimated,csr_target,train_nll,heldout_nll,nll_gap,k_star";

    pub fn csv_row(&self, method: &str, seed: u64) -> String {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let f = |x: f64| format!("{x:.16e}");
        [
            method.to_string(),
            seed.to_string(),
            f(self.common.f1),
            f(self.specific_pooled.f1),
            f(self.combined.precision),
            f(self.combined.recall),
            f(self.combined.f1),
            f(self.csr_estimated),
            f(self.csr_target),
            f(mean(&self.train_nll)),
            f(mean(&self.heldout_nll)),
            f(self.nll_gap),
            self.k_star.map_or_else(String::new, f),
        ]
        .join(",")
    }
}

/// Average Gaussian negative log-likelihood per sample,
/// `½ [tr(Σ̂Θ) − log det Θ + p log 2π]`.
pub fn gaussian_nll(cov: &ClassCovariance, theta: &DMatrix<f64>) -> Result<f64> {
    let p = theta.nrows() as f64;
    Ok(0.5
        * (linalg::trace_product(&cov.sigma_hat, theta) - linalg::logdet_spd(theta)?
            + p * (2.0 * std::f64::consts::PI).ln()))
}

pub fn score_recovery(scenario: &SyntheticScenario, model: &JointModel, edge_tol: f64) -> Result<RecoveryReport> {
    let train = scenario.class_covariances()?;
    let heldout = scenario.heldout_covariances()?;
    score_recovery_with(scenario, model, edge_tol, &train, &heldout)
}

/// [`score_recovery`] with precomputed training and held-out covariances.
pub fn score_recovery_with(
    scenario: &SyntheticScenario,
    model: &JointModel,
    edge_tol: f64,
    train: &[ClassCovariance],
    heldout: &[ClassCovariance],
) -> Result<RecoveryReport> {
    if model.p() != scenario.p() || model.n_classes() != scenario.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "model is p={} C={}, scenario is p={} C={}",
            model.p(),
            model.n_classes(),
            scenario.p(),
            scenario.n_classes()
        )));
    }
    let common = LayerScore::of(&model.theta_com, &scenario.theta_com_true, edge_tol);
    let mut specific = Vec::new();
    let (mut s_tp, mut s_fp, mut s_fn) = (0, 0, 0);
    let (mut c_tp, mut c_fp, mut c_fn) = (0, 0, 0);
    for c in 0..scenario.n_classes() {
        let (tp, fp, fn_) = LayerScore::compare(&model.s[c], &scenario.s_true[c], edge_tol);
        specific.push(LayerScore::from_counts(tp, fp, fn_));
        s_tp += tp;
        s_fp += fp;
        s_fn += fn_;
        let (tp, fp, fn_) =
            LayerScore::compare(&model.class_precision(c), &scenario.theta_true[c], edge_tol);
        c_tp += tp;
        c_fp += fp;
        c_fn += fn_;
    }
    let train_nll = train
        .iter()
        .zip(&model.theta_hat)
        .map(|(cov, t)| gaussian_nll(cov, t))
        .collect::<Result<Vec<_>>>()?;
    let heldout_nll = heldout
        .iter()
        .zip(&model.theta_hat)
        .map(|(cov, t)| gaussian_nll(cov, t))
        .collect::<Result<Vec<_>>>()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let nll_gap = mean(&heldout_nll) - mean(&train_nll);
    Ok(RecoveryReport {
        common,
        specific,
        specific_pooled: LayerScore::from_counts(s_tp, s_fp, s_fn),
        combined: LayerScore::from_counts(c_tp, c_fp, c_fn),
        csr_estimated: common_specific_ratio(model, edge_tol),
        csr_target: scenario.target_common_ratio(),
        train_nll,
        heldout_nll,
        nll_gap,
        k_star: model.k_star,
    })
}

/// Per-class graphical lasso at `λ = ρ`, wrapped as a model.
pub fn fit_independent(covs: &[ClassCovariance], config: &SolverConfig) -> Result<JointModel> {
    let thetas = covs
        .iter()
        .map(|c| reference_glasso(&c.sigma_hat, config.rho))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointModel::from_independent(thetas, covs, config))
}

/// Results of the three fitting variants on one scenario.
#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub independent: RecoveryReport,
    pub joint: RecoveryReport,
    pub joint_model: JointModel,
    /// Joint fit with oracle priors and eBIC-selected sharpness, when run.
    pub joint_prior: Option<RecoveryReport>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSettings {
    pub config: SolverConfig,
    pub edge_tol: f64,
    pub gamma_ebic: f64,
    /// Candidate sharpness values for the prior-guided variant; `None` skips it.
    pub k_candidates: Option<Vec<f64>>,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self { config: SolverConfig::default(), edge_tol: 1e-6, gamma_ebic: 0.5, k_candidates: None }
    }
}

pub fn compare_methods(scenario: &SyntheticScenario, settings: &BenchmarkSettings) -> Result<MethodComparison> {
    let train = scenario.class_covariances()?;
    let heldout = scenario.heldout_covariances()?;
    let independent_model = fit_independent(&train, &settings.config)?;
    let uniform: Vec<_> = (0..scenario.n_classes()).map(|_| AdaptiveWeightMatrix::uniform(scenario.p())).collect();
    let mut joint_model = fit_joint(&train, &uniform, &settings.config)?;
    joint_model.k_star = Some(0.0);
    let joint_prior = match &settings.k_candidates {
        Some(cands) => {
            let priors: Vec<_> = (0..scenario.n_classes()).map(|c| scenario.oracle_prior(c)).collect();
            let sel = select_k(
                cands,
                &SelectionContext {
                    covs: &train,
                    priors: &priors,
                    config: settings.config,
                    gamma_ebic: settings.gamma_ebic,
                    edge_tol: settings.edge_tol,
                },
            )?;
            Some(score_recovery_with(scenario, &sel.model, settings.edge_tol, &train, &heldout)?)
        }
        None => None,
    };
    Ok(MethodComparison {
        independent: score_recovery_with(scenario, &independent_model, settings.edge_tol, &train, &heldout)?,
        joint: score_recovery_with(scenario, &joint_model, settings.edge_tol, &train, &heldout)?,
        joint_model,
        joint_prior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Oracle,
    Noise,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub k_star: f64,
    pub f1_selected: f64,
    pub f1_k0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRejectionStats {
    pub kind: PriorKind,
    pub trials: Vec<TrialOutcome>,
    pub fraction_k_zero: f64,
    pub mean_k_star: f64,
}

/// Seeds for independent trials, split off the base seed.
pub fn trial_seeds(base_seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = rng_for(base_seed, TRIAL_STREAM);
    (0..trials).map(|_| rng.next_u64()).collect()
}

fn run_prior_trial(
    spec: ScenarioSpec,
    k_candidates: &[f64],
    kind: PriorKind,
    settings: &BenchmarkSettings,
) -> Result<TrialOutcome> {
    let scenario = generate_scenario(spec)?;
    let covs = scenario.class_covariances()?;
    let priors: Vec<PriorMatrix> = (0..scenario.n_classes())
        .map(|c| match kind {
            PriorKind::Oracle => scenario.oracle_prior(c),
            PriorKind::Noise => scenario.noise_prior(c, spec.seed),
            PriorKind::Constant => PriorMatrix::constant(scenario.p(), c + 1),
        })
        .collect();
    let ctx = SelectionContext {
        covs: &covs,
        priors: &priors,
        config: settings.config,
        gamma_ebic: settings.gamma_ebic,
        edge_tol: settings.edge_tol,
    };
    let sel = select_k(k_candidates, &ctx)?;
    let combined_f1 = |m: &JointModel| {
        let mut counts = (0, 0, 0);
        for c in 0..scenario.n_classes() {
            let (tp, fp, fn_) = LayerScore::compare(&m.class_precision(c), &scenario.theta_true[c], settings.edge_tol);
            counts = (counts.0 + tp, counts.1 + fp, counts.2 + fn_);
        }
        LayerScore::from_counts(counts.0, counts.1, counts.2).f1
    };
    let uniform: Vec<_> = (0..scenario.n_classes()).map(|_| AdaptiveWeightMatrix::uniform(scenario.p())).collect();
    let k0 = fit_joint(&covs, &uniform, &settings.config)?;
    Ok(TrialOutcome {
        seed: spec.seed,
        k_star: sel.k_star,
        f1_selected: combined_f1(&sel.model),
        f1_k0: combined_f1(&k0),
    })
}

/// Repeats eBIC sharpness selection on fresh scenarios (seeds split from
/// `base.seed`) with the requested kind of prior.
pub fn prior_rejection_trial(
    base: ScenarioSpec,
    trials: usize,
    k_candidates: &[f64],
    kind: PriorKind,
    settings: &BenchmarkSettings,
) -> Result<PriorRejectionStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let specs: Vec<ScenarioSpec> = trial_seeds(base.seed, trials)
        .into_iter()
        .map(|seed| ScenarioSpec { seed, ..base })
        .collect();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<TrialOutcome>> = {
        use rayon::prelude::*;
        specs.par_iter().map(|s| run_prior_trial(*s, k_candidates, kind, settings)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<TrialOutcome>> =
        specs.iter().map(|s| run_prior_trial(*s, k_candidates, kind, settings)).collect();
    let trials = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let n = trials.len() as f64;
    Ok(PriorRejectionStats {
        kind,
        fraction_k_zero: trials.iter().filter(|t| t.k_star == 0.0).count() as f64 / n,
        mean_k_star: trials.iter().map(|t| t.k_star).sum::<f64>() / n,
        trials,
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
