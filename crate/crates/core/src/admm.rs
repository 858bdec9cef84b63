//! Joint common/specific sparse precision estimation by ADMM.
//!
//! Every class precision is split as `Θ_com + S^(c)`. The solver works on the
//! scaled-dual augmented Lagrangian with consensus variables `Z^(c)` that stay
//! strictly positive definite, and sweeps the updates in the order
//! `Z → Θ_com → S → U`:
//!
//! * `Z^(c)`: eigenvalue map of `G − Σ̂/μ` with `G = Θ_com + S^(c) − U^(c)/μ`,
//!   `λ ↦ (λ + sqrt(λ² + 4/μ)) / 2`;
//! * `Θ_com`: soft-threshold of the class average of `Z − S + U/μ` at `ρ/(Cμ)`;
//! * `S^(c)`: entry-wise soft-threshold of `Z − Θ_com + U/μ` at `γ_s w̃_ij/μ`;
//! * `U^(c) += μ (Z − Θ_com − S)`.
//!
//! Diagonals are exempt from both ℓ1 terms unless `penalize_diagonal` is set.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussianize::ClassCovariance;
use crate::linalg;
use crate::priors::AdaptiveWeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// ℓ1 strength on the common structure.
    pub rho: f64,
    /// ℓ1 strength on the class-specific structures.
    pub gamma_s: f64,
    /// Augmented Lagrangian parameter, held fixed.
    pub mu: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub penalize_diagonal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            gamma_s: 0.1,
            mu: 1.0,
            max_iters: 200,
            primal_tol: 1e-4,
            dual_tol: 1e-4,
            penalize_diagonal: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("gamma_s", self.gamma_s),
            ("mu", self.mu),
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub primal: f64,
    pub dual: f64,
    /// Joint objective at the current `(Θ_com, S)`, or at `Z` when the sum is
    /// not positive definite yet.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmState {
    pub theta_com: DMatrix<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub u: Vec<DMatrix<f64>>,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
}

impl AdmmState {
    /// Feasible PD start: `Θ_com = diag(Σ̂_pooled)⁻¹`, `S = U = 0`, `Z = Θ_com`.
    pub fn initial(covs: &[ClassCovariance]) -> Self {
        let p = covs[0].p();
        let total: f64 = covs.iter().map(|c| c.n_c as f64).sum();
        let mut theta_com = DMatrix::zeros(p, p);
        for i in 0..p {
            let pooled: f64 =
                covs.iter().map(|c| c.n_c as f64 * c.sigma_hat[(i, i)]).sum::<f64>() / total;
            theta_com[(i, i)] = if pooled > 0.0 { 1.0 / pooled } else { 1.0 };
        }
        let c = covs.len();
        Self {
            s: vec![DMatrix::zeros(p, p); c],
            z: vec![theta_com.clone(); c],
            u: vec![DMatrix::zeros(p, p); c],
            theta_com,
            iteration: 0,
            history: Vec::new(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.s.len()
    }

    /// max_c ‖Z^(c) − Θ_com − S^(c)‖_F
    pub fn primal_residual(&self) -> f64 {
        self.z
            .iter()
            .zip(&self.s)
            .map(|(z, s)| (z - &self.theta_com - s).norm())
            .fold(0.0, f64::max)
    }
}

pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `λ ↦ (λ + sqrt(λ² + 4/μ)) / 2`, written so large negative λ do not cancel
/// to zero.
pub fn z_eigenvalue_map(lambda: f64, mu: f64) -> f64 {
    let root = (lambda * lambda + 4.0 / mu).sqrt();
    if lambda >= 0.0 {
        0.5 * (lambda + root)
    } else {
        (2.0 / mu) / (root - lambda)
    }
}

/// argmin over Z ≻ 0 of `tr(Σ̂Z) − log det Z + (μ/2)‖Z − G‖²_F`.
pub fn z_update(g: &DMatrix<f64>, sigma_hat: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let target = linalg::symmetrize(&(g - sigma_hat / mu));
    if !linalg::all_finite(&target) {
        return Err(Error::NonFinite { context: "Z-update input".into() });
    }
    let eig = SymmetricEigen::new(target);
    let mapped = eig.eigenvalues.map(|l| z_eigenvalue_map(l, mu));
    let q = &eig.eigenvectors;
    let mut z = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    linalg::symmetrize_in_place(&mut z);
    Ok(z)
}

fn threshold_matrix(
    m: &DMatrix<f64>,
    tau: impl Fn(usize, usize) -> f64,
    penalize_diagonal: bool,
) -> DMatrix<f64> {
    let p = m.nrows();
    let mut out = DMatrix::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            out[(i, j)] = if i == j && !penalize_diagonal {
                m[(i, j)]
            } else {
                soft_threshold(m[(i, j)], tau(i, j))
            };
        }
    }
    out
}

pub fn theta_com_update(state: &AdmmState, config: &SolverConfig) -> DMatrix<f64> {
    let c = state.n_classes() as f64;
    let p = state.theta_com.nrows();
    let mut avg = DMatrix::zeros(p, p);
    for ((z, s), u) in state.z.iter().zip(&state.s).zip(&state.u) {
        avg += z - s + u / config.mu;
    }
    avg /= c;
    let tau = config.rho / (c * config.mu);
    let mut out = threshold_matrix(&avg, |_, _| tau, config.penalize_diagonal);
    linalg::symmetrize_in_place(&mut out);
    out
}

pub fn s_update(
    state: &AdmmState,
    weights: &[AdaptiveWeightMatrix],
    config: &SolverConfig,
) -> Vec<DMatrix<f64>> {
    state
        .z
        .iter()
        .zip(&state.u)
        .zip(weights)
        .map(|((z, u), w)| {
            let arg = z - &state.theta_com + u / config.mu;
            let scale = config.gamma_s / config.mu;
            let mut out = threshold_matrix(
                &arg,
                |i, j| scale * w.w_tilde()[(i, j)],
                config.penalize_diagonal,
            );
            linalg::symmetrize_in_place(&mut out);
            out
        })
        .collect()
}

pub fn dual_update(state: &mut AdmmState, mu: f64) {
    for ((u, z), s) in state.u.iter_mut().zip(&state.z).zip(&state.s) {
        *u += (z - &state.theta_com - s) * mu;
        linalg::symmetrize_in_place(u);
    }
}

/// The joint penalized objective for given `Θ^(c) = Θ_com + S^(c)`, or `None`
/// when some `Θ^(c)` is not positive definite.
pub fn joint_objective(
    covs: &[ClassCovariance],
    theta_com: &DMatrix<f64>,
    s: &[DMatrix<f64>],
    weights: &[AdaptiveWeightMatrix],
    config: &SolverConfig,
) -> Option<f64> {
    let mut total = config.rho * linalg::l1_norm(theta_com, config.penalize_diagonal);
    for ((cov, s_c), w) in covs.iter().zip(s).zip(weights) {
        let theta = theta_com + s_c;
        total += linalg::trace_product(&cov.sigma_hat, &theta) - linalg::logdet_spd(&theta).ok()?;
        total += config.gamma_s * linalg::l1_norm(&s_c.component_mul(w.w_tilde()), config.penalize_diagonal);
    }
    Some(total)
}

fn smooth_objective(covs: &[ClassCovariance], z: &[DMatrix<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (cov, z_c) in covs.iter().zip(z) {
        total += linalg::trace_product(&cov.sigma_hat, z_c) - linalg::logdet_spd(z_c)?;
    }
    Ok(total)
}

fn validate_inputs(
    covs: &[ClassCovariance],
    weights: &[AdaptiveWeightMatrix],
    config: &SolverConfig,
) -> Result<usize> {
    config.validate()?;
    let p = covs
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one class covariance is required".into()))?
        .p();
    if p == 0 {
        return Err(Error::InvalidArgument("empty covariance".into()));
    }
    for c in covs {
        if c.sigma_hat.shape() != (p, p) {
            return Err(Error::DimensionMismatch(format!(
                "class {} covariance is {:?}, expected {p}x{p}",
                c.class_id,
                c.sigma_hat.shape()
            )));
        }
        if !linalg::all_finite(&c.sigma_hat) {
            return Err(Error::NonFinite { context: format!("class {} covariance", c.class_id) });
        }
    }
    if weights.len() != covs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weight matrices for {} classes",
            weights.len(),
            covs.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| w.w_tilde().shape() != (p, p)) {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix is {:?}, expected {p}x{p}",
            w.w_tilde().shape()
        )));
    }
    Ok(p)
}

/// Runs one full ADMM sweep in place and returns the dual residual.
fn sweep(
    state: &mut AdmmState,
    covs: &[ClassCovariance],
    weights: &[AdaptiveWeightMatrix],
    config: &SolverConfig,
) -> Result<f64> {
    let before: Vec<DMatrix<f64>> = state.s.iter().map(|s| &state.theta_com + s).collect();
    for c in 0..state.n_classes() {
        let g = &state.theta_com + &state.s[c] - &state.u[c] / config.mu;
        state.z[c] = z_update(&g, &covs[c].sigma_hat, config.mu)
            .map_err(|_| Error::Diverged { iteration: state.iteration })?;
    }
    state.theta_com = theta_com_update(state, config);
    state.s = s_update(state, weights, config);
    dual_update(state, config.mu);
    let dual = before
        .iter()
        .zip(&state.s)
        .map(|(old, s)| (&state.theta_com + s - old).norm())
        .fold(0.0, f64::max)
        * config.mu;
    Ok(dual)
}

pub fn fit_joint(
    covs: &[ClassCovariance],
    weights: &[AdaptiveWeightMatrix],
    config: &SolverConfig,
) -> Result<JointModel> {
    fit_joint_observed(covs, weights, config, |_| {})
}

/// [`fit_joint`] with a callback invoked on the state after every iteration.
pub fn fit_joint_observed(
    covs: &[ClassCovariance],
    weights: &[AdaptiveWeightMatrix],
    config: &SolverConfig,
    mut observer: impl FnMut(&AdmmState),
) -> Result<JointModel> {
    validate_inputs(covs, weights, config)?;
    let mut state = AdmmState::initial(covs);
    let mut converged = false;
    while state.iteration < config.max_iters {
        let dual = sweep(&mut state, covs, weights, config)?;
        state.iteration += 1;
        let primal = state.primal_residual();
        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::Diverged { iteration: state.iteration });
        }
        let objective = match joint_objective(covs, &state.theta_com, &state.s, weights, config) {
            Some(v) => v,
            None => smooth_objective(covs, &state.z)?,
        };
        state.history.push(IterationRecord { primal, dual, objective });
        observer(&state);
        if primal < config.primal_tol && dual < config.dual_tol {
            converged = true;
            break;
        }
    }
    if converged {
        log_tail_monotonicity(&state.history);
    } else {
        log::warn!(
            "ADMM stopped at max_iters={} without converging (primal {:.3e}, dual {:.3e})",
            config.max_iters,
            state.history.last().map_or(f64::NAN, |r| r.primal),
            state.history.last().map_or(f64::NAN, |r| r.dual),
        );
    }
    Ok(JointModel::from_state(state, covs, config, converged))
}

fn log_tail_monotonicity(history: &[IterationRecord]) {
    let start = history.len() - (history.len() / 10).max(1);
    let increases = history[start.saturating_sub(1)..]
        .windows(2)
        .filter(|w| w[1].objective > w[0].objective + 1e-8)
        .count();
    if increases > 0 {
        log::debug!("objective increased on {increases} steps in the final 10% of iterations");
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub primal_history: Vec<f64>,
    pub dual_history: Vec<f64>,
    pub objective_history: Vec<f64>,
}

/// A fitted joint model. `theta_hat` holds the positive definite consensus
/// variables `Z^(c)` and is what downstream inference should use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointModelFile", into = "JointModelFile")]
pub struct JointModel {
    pub theta_com: DMatrix<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub theta_hat: Vec<DMatrix<f64>>,
    pub mu_hat: Vec<DVector<f64>>,
    pub n_c: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Residuals,
    pub config: SolverConfig,
    pub k_star: Option<f64>,
}

impl JointModel {
    fn from_state(
        state: AdmmState,
        covs: &[ClassCovariance],
        config: &SolverConfig,
        converged: bool,
    ) -> Self {
        let last = state.history.last().copied();
        let residuals = Residuals {
            primal: last.map_or(f64::NAN, |r| r.primal),
            dual: last.map_or(f64::NAN, |r| r.dual),
            primal_history: state.history.iter().map(|r| r.primal).collect(),
            dual_history: state.history.iter().map(|r| r.dual).collect(),
            objective_history: state.history.iter().map(|r| r.objective).collect(),
        };
        Self {
            theta_com: state.theta_com,
            s: state.s,
            theta_hat: state.z,
            mu_hat: covs.iter().map(|c| c.mu_hat.clone()).collect(),
            n_c: covs.iter().map(|c| c.n_c).collect(),
            converged,
            iterations: state.iteration,
            residuals,
            config: *config,
            k_star: None,
        }
    }

    /// Wraps independently estimated per-class precisions. The common layer
    /// is left empty and each class's estimate is stored as its specific part.
    pub fn from_independent(
        thetas: Vec<DMatrix<f64>>,
        covs: &[ClassCovariance],
        config: &SolverConfig,
    ) -> Self {
        let p = thetas[0].nrows();
        Self {
            theta_com: DMatrix::zeros(p, p),
            s: thetas.clone(),
            theta_hat: thetas,
            mu_hat: covs.iter().map(|c| c.mu_hat.clone()).collect(),
            n_c: covs.iter().map(|c| c.n_c).collect(),
            converged: true,
            iterations: 0,
            residuals: Residuals {
                primal: 0.0,
                dual: 0.0,
                primal_history: vec![],
                dual_history: vec![],
                objective_history: vec![],
            },
            config: *config,
            k_star: None,
        }
    }

    pub fn p(&self) -> usize {
        self.theta_com.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.theta_hat.len()
    }

    /// `Θ_com + S^(c)`, the sparse class precision used for edge support.
    pub fn class_precision(&self, c: usize) -> DMatrix<f64> {
        &self.theta_com + &self.s[c]
    }
}

#[derive(Serialize, Deserialize)]
struct JointModelFile {
    p: usize,
    #[serde(rename = "C")]
    n_classes: usize,
    theta_com: Vec<Vec<f64>>,
    s: Vec<Vec<Vec<f64>>>,
    theta_hat: Vec<Vec<Vec<f64>>>,
    mu_hat: Vec<Vec<f64>>,
    n_c: Vec<usize>,
    converged: bool,
    iterations: usize,
    residuals: Residuals,
    config: SolverConfig,
    k_star: Option<f64>,
}

impl From<JointModel> for JointModelFile {
    fn from(m: JointModel) -> Self {
        Self {
            p: m.p(),
            n_classes: m.n_classes(),
            theta_com: linalg::to_rows(&m.theta_com),
            s: m.s.iter().map(linalg::to_rows).collect(),
            theta_hat: m.theta_hat.iter().map(linalg::to_rows).collect(),
            mu_hat: m.mu_hat.iter().map(|v| v.iter().cloned().collect()).collect(),
            n_c: m.n_c,
            converged: m.converged,
            iterations: m.iterations,
            residuals: m.residuals,
            config: m.config,
            k_star: m.k_star,
        }
    }
}

impl TryFrom<JointModelFile> for JointModel {
    type Error = Error;

    fn try_from(f: JointModelFile) -> Result<Self> {
        let square = |rows: &Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>> {
            let m = linalg::from_rows(rows)?;
            if m.shape() != (f.p, f.p) {
                return Err(Error::DimensionMismatch(format!(
                    "{what} is {:?}, model declares p={}",
                    m.shape(),
                    f.p
                )));
            }
            Ok(m)
        };
        let theta_com = square(&f.theta_com, "theta_com")?;
        let s = f.s.iter().map(|m| square(m, "s")).collect::<Result<Vec<_>>>()?;
        let theta_hat = f.theta_hat.iter().map(|m| square(m, "theta_hat")).collect::<Result<Vec<_>>>()?;
        if s.len() != f.n_classes || theta_hat.len() != f.n_classes || f.mu_hat.len() != f.n_classes {
            return Err(Error::DimensionMismatch(format!(
                "model declares C={} but carries {} s, {} theta_hat, {} mu_hat",
                f.n_classes,
                s.len(),
                theta_hat.len(),
                f.mu_hat.len()
            )));
        }
        if f.mu_hat.iter().any(|m| m.len() != f.p) {
            return Err(Error::DimensionMismatch("mu_hat length differs from p".into()));
        }
        Ok(Self {
            theta_com,
            s,
            theta_hat,
            mu_hat: f.mu_hat.into_iter().map(DVector::from_vec).collect(),
            n_c: f.n_c,
            converged: f.converged,
            iterations: f.iterations,
            residuals: f.residuals,
            config: f.config,
            k_star: f.k_star,
        })
    }
}

/// Share of estimated edges that live in the common layer. Zero (with a
/// warning) when there are no edges at all.
pub fn common_specific_ratio(model: &JointModel, edge_tol: f64) -> f64 {
    let common = linalg::count_edges(&model.theta_com, edge_tol);
    let specific: usize = model.s.iter().map(|s| linalg::count_edges(s, edge_tol)).sum();
    if common + specific == 0 {
        log::warn!("no edges above tolerance {edge_tol}; common ratio reported as 0");
        return 0.0;
    }
    common as f64 / (common + specific) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::AdaptiveWeightMatrix;

    fn cov(sigma: DMatrix<f64>, n: usize) -> ClassCovariance {
        let p = sigma.nrows();
        ClassCovariance { class_id: 1, sigma_hat: sigma, n_c: n, mu_hat: DVector::zeros(p) }
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold(-2.0, 1.0), -1.0);
        assert_eq!(soft_threshold(-0.3, 0.0), -0.3);
    }

    #[test]
    fn eigen_map_values() {
        assert_eq!(z_eigenvalue_map(0.0, 1.0), 1.0);
        let v = z_eigenvalue_map(-10.0, 1.0);
        assert!((v - 0.5 * (-10.0 + 104f64.sqrt())).abs() < 1e-14);
        assert!((v - 0.099_019_513_592_784_83).abs() < 1e-12);
        assert!(z_eigenvalue_map(-1e12, 1.0) > 0.0);
    }

    #[test]
    fn scalar_z_update_minimizes_objective() {
        let z = z_update(&DMatrix::from_element(1, 1, 2.0), &DMatrix::from_element(1, 1, 1.0), 1.0)
            .unwrap()[(0, 0)];
        assert!((z - 0.5 * (1.0 + 5f64.sqrt())).abs() < 1e-12);
        let f = |x: f64| x - x.ln() + 0.5 * (x - 2.0).powi(2);
        let oracle = golden_section(f, 1e-9, 10.0);
        assert!((z - oracle).abs() < 1e-7);
    }

    #[test]
    fn theta_update_thresholds_off_diagonal_only() {
        let p = 2;
        let mut st = AdmmState {
            theta_com: DMatrix::zeros(p, p),
            s: vec![DMatrix::zeros(p, p)],
            z: vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 2.0])],
            u: vec![DMatrix::zeros(p, p)],
            iteration: 0,
            history: vec![],
        };
        let cfg = SolverConfig { rho: 1.0, mu: 1.0, ..Default::default() };
        let t = theta_com_update(&st, &cfg);
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));

        let cfg0 = SolverConfig { rho: 0.0, ..cfg };
        st.z[0][(0, 1)] = 0.3;
        st.z[0][(1, 0)] = 0.3;
        assert_eq!(theta_com_update(&st, &cfg0), st.z[0]);
    }

    #[test]
    fn theta_update_matches_entrywise_oracle() {
        let p = 4;
        let mk = |seed: f64| DMatrix::from_fn(p, p, |i, j| ((i + j) as f64 * seed + seed).sin());
        let st = AdmmState {
            theta_com: DMatrix::zeros(p, p),
            s: vec![mk(0.3), mk(0.7), mk(1.1)],
            z: vec![mk(1.3), mk(1.9), mk(2.3)],
            u: vec![mk(2.9), mk(3.1), mk(3.7)],
            iteration: 0,
            history: vec![],
        };
        let cfg = SolverConfig { rho: 0.4, mu: 1.7, ..Default::default() };
        let t = theta_com_update(&st, &cfg);
        for i in 0..p {
            for j in 0..p {
                let avg: f64 = (0..3)
                    .map(|c| st.z[c][(i, j)] - st.s[c][(i, j)] + st.u[c][(i, j)] / 1.7)
                    .sum::<f64>()
                    / 3.0;
                let want = if i == j {
                    avg
                } else {
                    let tau = 0.4 / (3.0 * 1.7);
                    avg.signum() * (avg.abs() - tau).max(0.0)
                };
                assert!((t[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s_update_zero_weights_is_identity_map() {
        let p = 3;
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.1, 0.2, 1.0, 0.05, -0.1, 0.05, 1.0]);
        let st = AdmmState {
            theta_com: DMatrix::identity(p, p) * 0.5,
            s: vec![DMatrix::zeros(p, p)],
            z: vec![z.clone()],
            u: vec![DMatrix::zeros(p, p)],
            iteration: 0,
            history: vec![],
        };
        let w = AdaptiveWeightMatrix::from_values(DMatrix::zeros(p, p), 0.0).unwrap();
        let out = s_update(&st, &[w], &SolverConfig::default());
        assert_eq!(out[0], &z - &st.theta_com);
    }

    #[test]
    fn s_update_heterogeneous_weights() {
        let p = 4;
        let z = DMatrix::from_fn(p, p, |i, j| 0.3 * ((i * j) as f64 + 1.0).cos());
        let z = linalg::symmetrize(&z);
        let u = linalg::symmetrize(&DMatrix::from_fn(p, p, |i, j| 0.1 * (i as f64 - j as f64)));
        let theta = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.05 });
        let wv = linalg::symmetrize(&DMatrix::from_fn(p, p, |i, j| ((i + 2 * j) % 5) as f64 / 5.0));
        let st = AdmmState {
            theta_com: theta.clone(),
            s: vec![DMatrix::zeros(p, p)],
            z: vec![z.clone()],
            u: vec![u.clone()],
            iteration: 0,
            history: vec![],
        };
        let cfg = SolverConfig { gamma_s: 0.8, mu: 2.0, ..Default::default() };
        let w = AdaptiveWeightMatrix::from_values(wv.clone(), 1.0).unwrap();
        let out = s_update(&st, &[w], &cfg);
        for i in 0..p {
            for j in 0..p {
                let x = z[(i, j)] - theta[(i, j)] + u[(i, j)] / 2.0;
                let want = if i == j { x } else { soft_threshold(x, 0.8 * wv[(i, j)] / 2.0) };
                assert!((out[0][(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dual_update_cases() {
        let p = 2;
        let theta = DMatrix::identity(p, p);
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
        let mut st = AdmmState {
            theta_com: theta.clone(),
            s: vec![s.clone()],
            z: vec![&theta + &s],
            u: vec![DMatrix::from_element(2, 2, 0.3)],
            iteration: 0,
            history: vec![],
        };
        dual_update(&mut st, 1.0);
        assert_eq!(st.u[0], DMatrix::from_element(2, 2, 0.3));

        st.z[0] = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]);
        dual_update(&mut st, 2.0);
        // U + 2 (Z − I − S)
        let want = DMatrix::from_row_slice(2, 2, &[0.3 + 1.0, 0.3 - 0.2, 0.3 - 0.2, 0.3 - 1.0]);
        assert!((&st.u[0] - want).norm() < 1e-14);
    }

    #[test]
    fn identity_covariances_give_identity() {
        let covs: Vec<_> = (0..3).map(|_| cov(DMatrix::identity(4, 4), 50)).collect();
        let w: Vec<_> = (0..3).map(|_| AdaptiveWeightMatrix::uniform(4)).collect();
        let m = fit_joint(&covs, &w, &SolverConfig::default()).unwrap();
        assert!(m.converged);
        for c in 0..3 {
            assert!((&m.theta_hat[c] - DMatrix::<f64>::identity(4, 4)).norm() < 1e-6);
            assert_eq!(m.s[c], DMatrix::zeros(4, 4));
        }
        assert_eq!(linalg::count_edges(&m.theta_com, 0.0), 0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { rho: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { mu: -1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let covs = vec![cov(DMatrix::identity(3, 3), 10), cov(DMatrix::identity(4, 4), 10)];
        let w = vec![AdaptiveWeightMatrix::uniform(3), AdaptiveWeightMatrix::uniform(3)];
        assert!(matches!(
            fit_joint(&covs, &w, &SolverConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nan_covariance_rejected() {
        let mut s = DMatrix::identity(2, 2);
        s[(0, 1)] = f64::NAN;
        let r = fit_joint(&[cov(s, 5)], &[AdaptiveWeightMatrix::uniform(2)], &SolverConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn csr_edge_cases() {
        let covs = vec![cov(DMatrix::identity(3, 3), 10)];
        let mut m = JointModel::from_independent(vec![DMatrix::identity(3, 3)], &covs, &SolverConfig::default());
        m.theta_com = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.0, 0.0, 0.0, 1.0]);
        m.s = vec![DMatrix::zeros(3, 3)];
        assert_eq!(common_specific_ratio(&m, 1e-6), 1.0);
        m.theta_com = DMatrix::identity(3, 3);
        m.s = vec![DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0])];
        assert_eq!(common_specific_ratio(&m, 1e-6), 0.0);
        m.s = vec![DMatrix::zeros(3, 3)];
        assert_eq!(common_specific_ratio(&m, 1e-6), 0.0);
    }

    #[test]
    fn model_json_round_trip_and_schema() {
        let covs: Vec<_> = (0..2).map(|_| cov(DMatrix::identity(3, 3) * 1.5, 20)).collect();
        let w: Vec<_> = (0..2).map(|_| AdaptiveWeightMatrix::uniform(3)).collect();
        let m = fit_joint(&covs, &w, &SolverConfig::default()).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        for key in ["p", "C", "theta_com", "s", "theta_hat", "mu_hat", "converged", "iterations", "residuals", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let text = serde_json::to_string(&m).unwrap();
        let back: JointModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
