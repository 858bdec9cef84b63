//! Structural priors from attention footprints and the adaptive penalty
//! weights derived from them.

mod selection;

pub use selection::{ebic_score, select_k, EbicScore, KScore, SelectionContext, SelectionReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Source,
    #[default]
    Target,
}

/// Row-stochastic `p × N_p` attention matrices for one class and modality.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    matrices: Vec<DMatrix<f64>>,
    class_id: usize,
    modality: Modality,
}

impl AttentionStack {
    pub fn new(matrices: Vec<DMatrix<f64>>, class_id: usize, modality: Modality) -> Result<Self> {
        if let Some(first) = matrices.first() {
            let shape = first.shape();
            for (k, m) in matrices.iter().enumerate() {
                if m.shape() != shape {
                    return Err(Error::DimensionMismatch(format!(
                        "attention matrix {k} is {:?}, expected {:?}",
                        m.shape(),
                        shape
                    )));
                }
                for r in 0..m.nrows() {
                    let row = m.row(r);
                    let sum = row.sum();
                    if row.iter().any(|v| !v.is_finite() || *v < 0.0)
                        || (sum - 1.0).abs() > ROW_SUM_TOL
                    {
                        return Err(Error::NotRowStochastic { matrix: k, row: r, sum });
                    }
                }
            }
        }
        Ok(Self { matrices, class_id, modality })
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Cosine co-occurrence of node footprints; symmetric with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMatrix {
    w: DMatrix<f64>,
    class_id: usize,
}

impl PriorMatrix {
    /// Wraps an externally built prior. Must be square and symmetric.
    pub fn from_values(w: DMatrix<f64>, class_id: usize) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::DimensionMismatch(format!("prior is {:?}", w.shape())));
        }
        if !linalg::all_finite(&w) {
            return Err(Error::NonFinite { context: "prior matrix".into() });
        }
        if linalg::max_asymmetry(&w) > 1e-9 {
            return Err(Error::InvalidArgument("prior matrix is not symmetric".into()));
        }
        Ok(Self { w, class_id })
    }

    /// All entries 0.5: carries no information at any sharpness.
    pub fn constant(p: usize, class_id: usize) -> Self {
        Self { w: DMatrix::from_element(p, p, 0.5), class_id }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn p(&self) -> usize {
        self.w.nrows()
    }
}

/// Per-edge ℓ1 multipliers in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveWeightMatrix {
    w_tilde: DMatrix<f64>,
    k: f64,
}

impl AdaptiveWeightMatrix {
    /// The prior-free weighting, every entry 0.5.
    pub fn uniform(p: usize) -> Self {
        Self { w_tilde: DMatrix::from_element(p, p, 0.5), k: 0.0 }
    }

    pub fn from_values(w_tilde: DMatrix<f64>, k: f64) -> Result<Self> {
        if !w_tilde.is_square() {
            return Err(Error::DimensionMismatch(format!("weights are {:?}", w_tilde.shape())));
        }
        if w_tilde.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("adaptive weights must lie in [0, 1]".into()));
        }
        Ok(Self { w_tilde, k })
    }

    pub fn w_tilde(&self) -> &DMatrix<f64> {
        &self.w_tilde
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Element-wise mean of the stack.
pub fn aggregate_attention(stack: &AttentionStack) -> Result<DMatrix<f64>> {
    let first = stack
        .matrices
        .first()
        .ok_or_else(|| Error::InvalidArgument("attention stack is empty".into()))?;
    let mut sum = DMatrix::zeros(first.nrows(), first.ncols());
    for m in &stack.matrices {
        sum += m;
    }
    Ok(sum / stack.matrices.len() as f64)
}

/// Row ℓ2-normalization followed by the Gram matrix `Ā Āᵀ`.
pub fn attention_prior(agg: &DMatrix<f64>, class_id: usize) -> Result<PriorMatrix> {
    let mut normalized = agg.clone();
    for r in 0..agg.nrows() {
        let norm = agg.row(r).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroAttentionRow(r));
        }
        normalized.row_mut(r).unscale_mut(norm);
    }
    let mut w = &normalized * normalized.transpose();
    linalg::symmetrize_in_place(&mut w);
    Ok(PriorMatrix { w, class_id })
}

/// `w̃_ij = 1 − 1/(1 + exp(−k (W_ij − 0.5)))`, evaluated as the equivalent
/// `1/(1 + exp(k (W_ij − 0.5)))`, which is exactly 0.5 at k = 0.
pub fn adaptive_weights(prior: &PriorMatrix, k: f64) -> Result<AdaptiveWeightMatrix> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!("sharpness k must be a finite non-negative number, got {k}")));
    }
    let w_tilde = prior.w.map(|w| 1.0 / (1.0 + (k * (w - 0.5)).exp()));
    Ok(AdaptiveWeightMatrix { w_tilde, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stochastic(rows: &[&[f64]]) -> DMatrix<f64> {
        let p = rows.len();
        let n = rows[0].len();
        DMatrix::from_fn(p, n, |i, j| rows[i][j] / rows[i].iter().sum::<f64>())
    }

    #[test]
    fn aggregate_singleton_and_duplicate() {
        let m = stochastic(&[&[1.0, 2.0, 3.0], &[4.0, 0.0, 1.0]]);
        let one = AttentionStack::new(vec![m.clone()], 1, Modality::Source).unwrap();
        assert_eq!(aggregate_attention(&one).unwrap(), m);
        let two = AttentionStack::new(vec![m.clone(), m.clone()], 1, Modality::Source).unwrap();
        assert!((aggregate_attention(&two).unwrap() - &m).norm() < 1e-15);
    }

    #[test]
    fn aggregate_matches_brute_force_mean() {
        let mats: Vec<DMatrix<f64>> = (0..3)
            .map(|k| {
                let raw = DMatrix::from_fn(4, 6, |i, j| ((i * 5 + j * 3 + k * 7) % 11) as f64 + 0.5);
                let mut m = raw.clone();
                for r in 0..4 {
                    let s = raw.row(r).sum();
                    m.row_mut(r).unscale_mut(s);
                }
                m
            })
            .collect();
        let stack = AttentionStack::new(mats.clone(), 2, Modality::Target).unwrap();
        let agg = aggregate_attention(&stack).unwrap();
        for i in 0..4 {
            for j in 0..6 {
                let mut s = 0.0;
                for m in &mats {
                    s += m[(i, j)];
                }
                assert!((agg[(i, j)] - s / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_stack_rejected() {
        let s = AttentionStack::new(vec![], 1, Modality::Source).unwrap();
        assert!(aggregate_attention(&s).is_err());
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        let bad = DMatrix::from_row_slice(1, 2, &[0.5, 0.6]);
        assert!(matches!(
            AttentionStack::new(vec![bad], 1, Modality::Source),
            Err(Error::NotRowStochastic { row: 0, .. })
        ));
        let neg = DMatrix::from_row_slice(1, 2, &[1.5, -0.5]);
        assert!(AttentionStack::new(vec![neg], 1, Modality::Source).is_err());
    }

    #[test]
    fn identical_rows_give_all_ones() {
        let agg = stochastic(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let w = attention_prior(&agg, 1).unwrap();
        assert!((w.values() - DMatrix::from_element(3, 3, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn disjoint_footprints_give_identity() {
        let agg = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(attention_prior(&agg, 1).unwrap().values(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn half_overlap() {
        let agg = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let w = attention_prior(&agg, 1).unwrap();
        assert!((w.values()[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((w.values()[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_row_reports_index() {
        let agg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(attention_prior(&agg, 1), Err(Error::ZeroAttentionRow(1))));
    }

    #[test]
    fn weights_at_zero_sharpness_are_half() {
        let prior = PriorMatrix::from_values(DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]), 1).unwrap();
        let w = adaptive_weights(&prior, 0.0).unwrap();
        assert!(w.w_tilde().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn weights_scalar_values() {
        let prior = PriorMatrix::from_values(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]), 1).unwrap();
        let w = adaptive_weights(&prior, 10.0).unwrap();
        assert_eq!(w.w_tilde()[(0, 1)], 0.5);
        let want = 1.0 - 1.0 / (1.0 + (-5f64).exp());
        assert!((w.w_tilde()[(0, 0)] - want).abs() < 1e-15);
        assert!((w.w_tilde()[(0, 0)] - 0.006_692_850_924_284_856).abs() < 1e-15);
    }

    #[test]
    fn negative_k_rejected() {
        assert!(adaptive_weights(&PriorMatrix::constant(2, 1), -1.0).is_err());
    }

    proptest! {
        #[test]
        fn weights_stay_in_open_interval(w in 0.0f64..=1.0, k in 0.0f64..60.0) {
            let prior = PriorMatrix::from_values(DMatrix::from_element(1, 1, w), 1).unwrap();
            let v = adaptive_weights(&prior, k).unwrap().w_tilde()[(0, 0)];
            prop_assert!(v > 0.0 && v < 1.0);
        }

        #[test]
        fn weights_monotone(w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0, k in 0.1f64..40.0, dk in 0.1f64..10.0) {
            prop_assume!((w1 - w2).abs() > 1e-6);
            let f = |w: f64, k: f64| {
                let prior = PriorMatrix::from_values(DMatrix::from_element(1, 1, w), 1).unwrap();
                adaptive_weights(&prior, k).unwrap().w_tilde()[(0, 0)]
            };
            let (lo, hi) = if w1 < w2 { (w1, w2) } else { (w2, w1) };
            prop_assert!(f(lo, k) > f(hi, k));
            if hi > 0.5 + 1e-3 {
                prop_assert!(f(hi, k + dk) < f(hi, k));
            }
            if lo < 0.5 - 1e-3 {
                prop_assert!(f(lo, k + dk) > f(lo, k));
            }
        }

        #[test]
        fn prior_is_psd_gram_with_unit_diagonal(vals in proptest::collection::vec(0.01f64..1.0, 15)) {
            let agg = DMatrix::from_row_slice(3, 5, &vals);
            let w = attention_prior(&agg, 1).unwrap();
            prop_assert!(linalg::min_eigenvalue(w.values()) > -1e-12);
            for i in 0..3 {
                prop_assert!((w.values()[(i, i)] - 1.0).abs() < 1e-9);
            }
            prop_assert!(linalg::max_asymmetry(w.values()) == 0.0);
        }
    }
}
