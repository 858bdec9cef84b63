//! Rank-based nonparanormal transform and class-conditional covariance.
//!
//! Each column is pushed through its empirical CDF, `(rank - 0.5) / n`, and
//! then through the standard normal quantile. Ties receive their average
//! rank, so tied inputs map to identical outputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::normal::normal_quantile;

/// Per-sample node observations for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    data: DMatrix<f64>,
    class_id: usize,
    transformed: bool,
}

impl ObservationMatrix {
    /// Raw (untransformed) observations; rows are samples.
    pub fn new(data: DMatrix<f64>, class_id: usize) -> Result<Self> {
        Self::build(data, class_id, false)
    }

    /// Observations already on a marginal standard-normal scale, e.g. draws
    /// from a Gaussian model, which can go straight to [`class_covariance`].
    pub fn gaussian(data: DMatrix<f64>, class_id: usize) -> Result<Self> {
        Self::build(data, class_id, true)
    }

    fn build(data: DMatrix<f64>, class_id: usize, transformed: bool) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::TooFewSamples { required: 2, got: data.nrows() });
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidArgument("observation matrix has no columns".into()));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            let (r, c) = (idx % data.nrows(), idx / data.nrows());
            return Err(Error::NonFinite { context: format!("observation row {r}, column {c}") });
        }
        Ok(Self { data, class_id, transformed })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn is_transformed(&self) -> bool {
        self.transformed
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.data.ncols()
    }
}

/// Output of [`nonparanormal_transform`]: the transformed matrix plus the
/// indices of constant columns, which collapse to all zeros.
#[derive(Debug, Clone)]
pub struct Gaussianized {
    pub matrix: ObservationMatrix,
    pub degenerate_columns: Vec<usize>,
}

/// Class-conditional second-moment matrix and mean of transformed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClassCovarianceFile", into = "ClassCovarianceFile")]
pub struct ClassCovariance {
    pub class_id: usize,
    pub sigma_hat: DMatrix<f64>,
    pub n_c: usize,
    pub mu_hat: DVector<f64>,
}

impl ClassCovariance {
    pub fn p(&self) -> usize {
        self.sigma_hat.nrows()
    }
}

#[derive(Serialize, Deserialize)]
struct ClassCovarianceFile {
    p: usize,
    #[serde(default)]
    class_id: usize,
    n_c: usize,
    sigma_hat: Vec<Vec<f64>>,
    mu_hat: Vec<f64>,
}

impl From<ClassCovariance> for ClassCovarianceFile {
    fn from(c: ClassCovariance) -> Self {
        Self {
            p: c.p(),
            class_id: c.class_id,
            n_c: c.n_c,
            sigma_hat: linalg::to_rows(&c.sigma_hat),
            mu_hat: c.mu_hat.iter().cloned().collect(),
        }
    }
}

impl TryFrom<ClassCovarianceFile> for ClassCovariance {
    type Error = Error;

    fn try_from(f: ClassCovarianceFile) -> Result<Self> {
        let sigma_hat = linalg::from_rows(&f.sigma_hat)?;
        if sigma_hat.nrows() != f.p || sigma_hat.ncols() != f.p || f.mu_hat.len() != f.p {
            return Err(Error::DimensionMismatch(format!(
                "covariance file declares p={} but carries {}x{} sigma_hat and {} means",
                f.p,
                sigma_hat.nrows(),
                sigma_hat.ncols(),
                f.mu_hat.len()
            )));
        }
        Ok(Self { class_id: f.class_id, sigma_hat, n_c: f.n_c, mu_hat: DVector::from_vec(f.mu_hat) })
    }
}

/// `(rank - 0.5) / n` with midranks for ties.
pub fn rank_ecdf(column: &[f64]) -> Result<Vec<f64>> {
    let n = column.len();
    if n == 0 {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }
    if let Some(i) = column.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: format!("column entry {i}") });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));

    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mid;
        }
        start = end;
    }
    let nf = n as f64;
    Ok(ranks.into_iter().map(|r| (r - 0.5) / nf).collect())
}

fn transform_column(column: &[f64]) -> Result<Vec<f64>> {
    rank_ecdf(column)?.into_iter().map(normal_quantile).collect()
}

pub fn nonparanormal_transform(obs: &ObservationMatrix) -> Result<Gaussianized> {
    if obs.transformed {
        return Err(Error::InvalidArgument("observations are already transformed".into()));
    }
    let (n, p) = obs.data.shape();
    let mut out = DMatrix::zeros(n, p);
    let mut degenerate_columns = Vec::new();
    for j in 0..p {
        let column: Vec<f64> = obs.data.column(j).iter().cloned().collect();
        if column.iter().all(|&v| v == column[0]) {
            log::warn!("column {j} is constant; nonparanormal output is all zeros");
            degenerate_columns.push(j);
        }
        let mapped = transform_column(&column)?;
        out.column_mut(j).copy_from_slice(&mapped);
    }
    Ok(Gaussianized {
        matrix: ObservationMatrix { data: out, class_id: obs.class_id, transformed: true },
        degenerate_columns,
    })
}

/// Fits one transform on the rows of all classes stacked together, then
/// splits the result back into per-class matrices in input order.
pub fn nonparanormal_pooled(classes: &[ObservationMatrix]) -> Result<Vec<Gaussianized>> {
    let first = classes
        .first()
        .ok_or_else(|| Error::InvalidArgument("no classes supplied".into()))?;
    let p = first.n_nodes();
    if let Some(bad) = classes.iter().find(|c| c.n_nodes() != p) {
        return Err(Error::DimensionMismatch(format!(
            "class {} has {} columns, expected {p}",
            bad.class_id,
            bad.n_nodes()
        )));
    }
    let total: usize = classes.iter().map(|c| c.n_samples()).sum();
    let mut stacked = DMatrix::zeros(total, p);
    let mut offset = 0;
    for c in classes {
        stacked.rows_mut(offset, c.n_samples()).copy_from(&c.data);
        offset += c.n_samples();
    }
    let pooled = nonparanormal_transform(&ObservationMatrix::new(stacked, 0)?)?;
    let mut offset = 0;
    Ok(classes
        .iter()
        .map(|c| {
            let rows = pooled.matrix.data.rows(offset, c.n_samples()).into_owned();
            offset += c.n_samples();
            Gaussianized {
                matrix: ObservationMatrix { data: rows, class_id: c.class_id, transformed: true },
                degenerate_columns: pooled.degenerate_columns.clone(),
            }
        })
        .collect())
}

/// Uncentered second moment `(1/n) Σ z zᵀ` plus the column mean.
pub fn class_covariance(obs: &ObservationMatrix) -> Result<ClassCovariance> {
    if !obs.transformed {
        return Err(Error::InvalidArgument(
            "class covariance expects transformed observations".into(),
        ));
    }
    let n = obs.n_samples();
    let mut sigma_hat = obs.data.tr_mul(&obs.data) / n as f64;
    linalg::symmetrize_in_place(&mut sigma_hat);
    let mu_hat = obs.data.row_mean().transpose();
    Ok(ClassCovariance { class_id: obs.class_id, sigma_hat, n_c: n, mu_hat })
}
