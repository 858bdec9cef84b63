//! Sharpness selection by extended BIC.
//!
//! ```text
//! eBIC = Σ_c n_c [tr(Σ̂_c Θ̂_c) − log det Θ̂_c] + |E| log(Σ_c n_c) + 4 γ |E| log p
//! ```
//!
//! `Θ̂_c` is the positive definite consensus estimate and `|E|` counts the
//! off-diagonal upper-triangle support of `Θ_com + S^(c)`, summed over classes.

use serde::{Deserialize, Serialize};

use super::{adaptive_weights, AdaptiveWeightMatrix, PriorMatrix};
use crate::admm::{fit_joint, JointModel, SolverConfig};
use crate::error::{Error, Result};
use crate::gaussianize::ClassCovariance;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbicScore {
    pub ebic: f64,
    pub edges: usize,
}

pub fn ebic_score(
    model: &JointModel,
    covs: &[ClassCovariance],
    gamma_ebic: f64,
    edge_tol: f64,
) -> Result<EbicScore> {
    if covs.len() != model.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariances for a {}-class model",
            covs.len(),
            model.n_classes()
        )));
    }
    let p = model.p();
    let mut fit = 0.0;
    let mut edges = 0usize;
    let mut n_total = 0.0;
    for (c, cov) in covs.iter().enumerate() {
        if cov.p() != p {
            return Err(Error::DimensionMismatch(format!("class {c} covariance has p={}", cov.p())));
        }
        let theta = &model.theta_hat[c];
        let logdet = linalg::logdet_spd(theta)
            .map_err(|_| Error::NotPositiveDefinite(format!("theta_hat of class {c}")))?;
        let n = cov.n_c as f64;
        fit += n * (linalg::trace_product(&cov.sigma_hat, theta) - logdet);
        n_total += n;
        edges += linalg::count_edges(&model.class_precision(c), edge_tol);
    }
    let e = edges as f64;
    let ebic = fit + e * n_total.ln() + 4.0 * gamma_ebic * e * (p as f64).ln();
    Ok(EbicScore { ebic, edges })
}

/// Everything a candidate fit needs besides k.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub covs: &'a [ClassCovariance],
    /// One prior per class.
    pub priors: &'a [PriorMatrix],
    pub config: SolverConfig,
    pub gamma_ebic: f64,
    pub edge_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: f64,
    pub ebic: f64,
    pub edges: usize,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub k_star: f64,
    pub weights: Vec<AdaptiveWeightMatrix>,
    pub model: JointModel,
    pub scores: Vec<KScore>,
    /// Candidates dropped because their fit did not converge.
    pub skipped: Vec<f64>,
}

#[derive(Serialize)]
struct SelectionReportFile<'a> {
    k_star: f64,
    scores: &'a [KScore],
    skipped: &'a [f64],
}

impl SelectionReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SelectionReportFile {
            k_star: self.k_star,
            scores: &self.scores,
            skipped: &self.skipped,
        })
        .expect("report serializes")
    }
}

struct Candidate {
    k: f64,
    weights: Vec<AdaptiveWeightMatrix>,
    model: JointModel,
    score: EbicScore,
}

fn evaluate(k: f64, ctx: &SelectionContext<'_>) -> Result<Option<Candidate>> {
    let weights = ctx
        .priors
        .iter()
        .map(|p| adaptive_weights(p, k))
        .collect::<Result<Vec<_>>>()?;
    let mut model = fit_joint(ctx.covs, &weights, &ctx.config)?;
    if !model.converged {
        log::warn!("skipping k={k}: fit did not converge in {} iterations", model.iterations);
        return Ok(None);
    }
    model.k_star = Some(k);
    let score = ebic_score(&model, ctx.covs, ctx.gamma_ebic, ctx.edge_tol)?;
    Ok(Some(Candidate { k, weights, model, score }))
}

/// Fits every candidate from a cold start and keeps the eBIC minimizer,
/// breaking exact ties toward the smaller k.
pub fn select_k(candidates: &[f64], ctx: &SelectionContext<'_>) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate list is empty".into()));
    }
    if let Some(k) = candidates.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid candidate k={k}")));
    }
    if !candidates.contains(&0.0) {
        return Err(Error::InvalidArgument("candidate list must include k = 0".into()));
    }
    if ctx.priors.len() != ctx.covs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} priors for {} classes",
            ctx.priors.len(),
            ctx.covs.len()
        )));
    }

    #[cfg(feature = "parallel")]
    let results: Vec<Result<Option<Candidate>>> = {
        use rayon::prelude::*;
        candidates.par_iter().map(|&k| evaluate(k, ctx)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Option<Candidate>>> =
        candidates.iter().map(|&k| evaluate(k, ctx)).collect();

    let mut best: Option<Candidate> = None;
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for (k, res) in candidates.iter().zip(results) {
        let Some(cand) = res? else {
            skipped.push(*k);
            continue;
        };
        scores.push(KScore { k: cand.k, ebic: cand.score.ebic, edges: cand.score.edges });
        let better = match &best {
            None => true,
            Some(b) => {
                cand.score.ebic < b.score.ebic || (cand.score.ebic == b.score.ebic && cand.k < b.k)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let best = best.ok_or(Error::SelectionFailed)?;
    Ok(SelectionReport {
        k_star: best.k,
        weights: best.weights,
        model: best.model,
        scores,
        skipped,
    })
}
