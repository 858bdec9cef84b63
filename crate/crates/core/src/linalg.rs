//! Small dense helpers shared by the solver, scoring and inference code.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// log det of a symmetric positive definite matrix via Cholesky.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// tr(AB) for same-shape matrices, without forming the product.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Upper-triangle off-diagonal positions with |m_ij| > tol.
pub fn support(m: &DMatrix<f64>, tol: f64) -> Vec<(usize, usize)> {
    let p = m.nrows();
    let mut out = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if m[(i, j)].abs() > tol {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn count_edges(m: &DMatrix<f64>, tol: f64) -> usize {
    support(m, tol).len()
}

/// Off-diagonal ℓ1 norm (or full when `include_diagonal`).
pub fn l1_norm(m: &DMatrix<f64>, include_diagonal: bool) -> f64 {
    let p = m.nrows();
    let mut s = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j || include_diagonal {
                s += m[(i, j)].abs();
            }
        }
    }
    s
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_of_3x3_matches_cofactor_expansion() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let det: f64 = 4.0 * (3.0 * 2.0 - 0.2 * 0.2) - 1.0 * (1.0 * 2.0 - 0.2 * 0.5)
            + 0.5 * (1.0 * 0.2 - 3.0 * 0.5);
        assert!((logdet_spd(&m).unwrap() - det.ln()).abs() < 1e-13);
    }

    #[test]
    fn logdet_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(logdet_spd(&m).is_err());
    }

    #[test]
    fn trace_product_matches_product() {
        let a = DMatrix::from_fn(4, 4, |i, j| (i * 3 + j) as f64 * 0.1);
        let b = DMatrix::from_fn(4, 4, |i, j| (i as f64 - j as f64).sin());
        assert!((trace_product(&a, &b) - (&a * &b).trace()).abs() < 1e-12);
    }
}
