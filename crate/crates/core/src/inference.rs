//! Downstream use of fitted precision matrices: Gaussian log-likelihood
//! classification and sign-partitioned message passing.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::admm::JointModel;
use crate::error::{Error, Result};
use crate::normal::gelu;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScores {
    pub scores: Vec<f64>,
    /// 0-based index of the best score; ties go to the smallest index.
    pub predicted: usize,
}

impl ClassifierScores {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut predicted = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[predicted] {
                predicted = c;
            }
        }
        Self { scores, predicted }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassifyOptions {
    /// Add `log(n_c / N)` to each class score.
    pub log_prior: bool,
}

/// Per-class factorizations of `theta_hat`, reusable across many samples.
#[derive(Debug, Clone)]
pub struct Classifier {
    factors: Vec<Cholesky<f64, nalgebra::Dyn>>,
    half_logdet: Vec<f64>,
    means: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

impl Classifier {
    pub fn new(model: &JointModel, options: ClassifyOptions) -> Result<Self> {
        let total: f64 = model.n_c.iter().map(|&n| n as f64).sum();
        let mut factors = Vec::with_capacity(model.n_classes());
        let mut half_logdet = Vec::with_capacity(model.n_classes());
        for (c, theta) in model.theta_hat.iter().enumerate() {
            let chol = Cholesky::new(theta.clone())
                .ok_or_else(|| Error::NotPositiveDefinite(format!("theta_hat of class {c}")))?;
            half_logdet.push(chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>());
            factors.push(chol);
        }
        let offsets = (0..model.n_classes())
            .map(|c| {
                if options.log_prior && total > 0.0 {
                    (model.n_c[c] as f64 / total).ln()
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { factors, half_logdet, means: model.mu_hat.clone(), offsets })
    }

    /// `½ log det Θ_c − ½ (z − μ_c)ᵀ Θ_c (z − μ_c)` for every class.
    pub fn classify(&self, z: &DVector<f64>) -> Result<ClassifierScores> {
        let p = self.means.first().map_or(0, |m| m.len());
        if z.len() != p {
            return Err(Error::DimensionMismatch(format!("sample has {} entries, model has p={p}", z.len())));
        }
        let scores = self
            .factors
            .iter()
            .zip(&self.means)
            .zip(self.half_logdet.iter().zip(&self.offsets))
            .map(|((chol, mu), (hld, off))| {
                let d = z - mu;
                hld - 0.5 * quadratic_form(chol.l_dirty(), &d) + off
            })
            .collect();
        Ok(ClassifierScores::from_scores(scores))
    }
}

/// dᵀ L Lᵀ d = ‖Lᵀ d‖², reading only the lower triangle of `l` (the upper
/// part of `l_dirty` is not zeroed).
fn quadratic_form(l: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let p = d.len();
    let mut total = 0.0;
    for k in 0..p {
        let mut v = 0.0;
        for i in k..p {
            v += l[(i, k)] * d[i];
        }
        total += v * v;
    }
    total
}

pub fn classify(z_tilde: &DVector<f64>, model: &JointModel) -> Result<ClassifierScores> {
    Classifier::new(model, ClassifyOptions::default())?.classify(z_tilde)
}

/// Per-node feature vectors, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    features: DMatrix<f64>,
}

impl NodeFeatures {
    pub fn new(features: DMatrix<f64>) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "node features".into() });
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessagePassingWeights {
    pub w_pos: DMatrix<f64>,
    pub w_neg: DMatrix<f64>,
    pub epsilon: f64,
}

impl MessagePassingWeights {
    pub fn new(w_pos: DMatrix<f64>, w_neg: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if w_pos.shape() != w_neg.shape() {
            return Err(Error::DimensionMismatch(format!(
                "w_pos is {:?} but w_neg is {:?}",
                w_pos.shape(),
                w_neg.shape()
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        Ok(Self { w_pos, w_neg, epsilon })
    }

    /// Identity projections on both branches with the default epsilon.
    pub fn identity(d: usize) -> Self {
        Self { w_pos: DMatrix::identity(d, d), w_neg: DMatrix::identity(d, d), epsilon: 1e-8 }
    }
}

/// Zeroes off-diagonal entries with `|θ_ij| ≤ edge_tol`.
pub fn threshold_support(theta: &DMatrix<f64>, edge_tol: f64) -> DMatrix<f64> {
    let mut out = theta.clone();
    for j in 0..theta.ncols() {
        for i in 0..theta.nrows() {
            if i != j && theta[(i, j)].abs() <= edge_tol {
                out[(i, j)] = 0.0;
            }
        }
    }
    out
}

/// Normalized branch weights for node `i`: `(α⁺, α⁻)` as rows over `j`.
/// Zero entries of θ and the diagonal belong to neither branch.
pub fn branch_weights(theta: &DMatrix<f64>, i: usize, epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let p = theta.nrows();
    let pos_sum: f64 = (0..p).filter(|&k| k != i && theta[(i, k)] > 0.0).map(|k| theta[(i, k)]).sum();
    let neg_sum: f64 = (0..p).filter(|&k| k != i && theta[(i, k)] < 0.0).map(|k| -theta[(i, k)]).sum();
    let mut pos = vec![0.0; p];
    let mut neg = vec![0.0; p];
    for j in 0..p {
        if j == i {
            continue;
        }
        let t = theta[(i, j)];
        if t > 0.0 {
            pos[j] = t / (pos_sum + epsilon);
        } else if t < 0.0 {
            neg[j] = -t / (neg_sum + epsilon);
        }
    }
    (pos, neg)
}

/// `h_i = GELU(Σ_{θ_ij>0} α⁺_ij W_posᵀ z_j + Σ_{θ_ij<0} α⁻_ij W_negᵀ z_j)`.
pub fn signed_message_passing(
    theta: &DMatrix<f64>,
    nodes: &NodeFeatures,
    weights: &MessagePassingWeights,
) -> Result<DMatrix<f64>> {
    let p = theta.nrows();
    if !theta.is_square() || nodes.features.nrows() != p {
        return Err(Error::DimensionMismatch(format!(
            "theta is {:?} but there are {} nodes",
            theta.shape(),
            nodes.features.nrows()
        )));
    }
    if weights.w_pos.nrows() != nodes.width() {
        return Err(Error::DimensionMismatch(format!(
            "projection expects width {}, features have {}",
            weights.w_pos.nrows(),
            nodes.width()
        )));
    }
    // Rows of Z·W are the projected node features Wᵀ z_j.
    let proj_pos = &nodes.features * &weights.w_pos;
    let proj_neg = &nodes.features * &weights.w_neg;
    let out_width = weights.w_pos.ncols();
    let mut out = DMatrix::zeros(p, out_width);
    for i in 0..p {
        let (pos, neg) = branch_weights(theta, i, weights.epsilon);
        for f in 0..out_width {
            let mut pre = 0.0;
            for j in 0..p {
                pre += pos[j] * proj_pos[(j, f)] + neg[j] * proj_neg[(j, f)];
            }
            out[(i, f)] = gelu(pre);
        }
    }
    Ok(out)
}

/// `ρ_ij = −θ_ij / sqrt(θ_ii θ_jj)` with unit diagonal.
pub fn partial_correlation(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = theta.nrows();
    if let Some(i) = (0..p).find(|&i| !(theta[(i, i)] > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is not positive")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            let v = -0.5 * (theta[(i, j)] + theta[(j, i)]) / (theta[(i, i)] * theta[(j, j)]).sqrt();
            v.clamp(-1.0, 1.0)
        }
    }))
}
