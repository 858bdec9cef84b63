//! Single-class graphical lasso by block coordinate descent on the
//! covariance, with the off-diagonal ℓ1 penalty
//! `tr(Σ̂Θ) − log det Θ + λ Σ_{i≠j} |θ_ij|`.
//!
//! This is deliberately a separate algorithm from the ADMM solver so the two
//! can check each other. Iteration stops once the primal/dual gap drops
//! below `1e-6`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

const GAP_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 2000;
const LASSO_TOL: f64 = 1e-13;
const LASSO_MAX_ITERS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub theta: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub sweeps: usize,
    pub gap: f64,
}

pub fn reference_glasso(sigma_hat: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    reference_glasso_fit(sigma_hat, lambda).map(|f| f.theta)
}

pub fn reference_glasso_fit(sigma_hat: &DMatrix<f64>, lambda: f64) -> Result<GlassoFit> {
    let p = sigma_hat.nrows();
    if !sigma_hat.is_square() || p == 0 {
        return Err(Error::DimensionMismatch(format!("covariance is {:?}", sigma_hat.shape())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    if (0..p).any(|i| !(sigma_hat[(i, i)] > 0.0)) {
        return Err(Error::InvalidArgument("covariance diagonal must be positive".into()));
    }
    let s = linalg::symmetrize(sigma_hat);
    if p == 1 {
        return Ok(GlassoFit {
            theta: DMatrix::from_element(1, 1, 1.0 / s[(0, 0)]),
            covariance: s,
            sweeps: 0,
            gap: 0.0,
        });
    }

    let mut w = s.clone();
    // beta[j] holds the regression of column j on the others, indexed by full
    // node id with beta[j][j] unused.
    let mut beta = vec![DVector::<f64>::zeros(p); p];
    let mut gap = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        for j in 0..p {
            solve_column_lasso(&w, &s, j, lambda, &mut beta[j]);
            for i in 0..p {
                if i != j {
                    let w_ij: f64 = (0..p).filter(|&k| k != j).map(|k| w[(i, k)] * beta[j][k]).sum();
                    w[(i, j)] = w_ij;
                    w[(j, i)] = w_ij;
                }
            }
        }
        let theta = precision_from_regressions(&w, &beta);
        if let Some(g) = duality_gap(&s, &w, &theta, lambda) {
            gap = g;
            if g.abs() < GAP_TOL {
                return Ok(GlassoFit { theta, covariance: w, sweeps: sweep, gap });
            }
        }
    }
    Err(Error::GlassoNotConverged { sweeps: MAX_SWEEPS, gap })
}

/// Coordinate descent on `½βᵀW₁₁β − s₁₂ᵀβ + λ‖β‖₁` over the indices `k ≠ j`.
fn solve_column_lasso(w: &DMatrix<f64>, s: &DMatrix<f64>, j: usize, lambda: f64, beta: &mut DVector<f64>) {
    let p = w.nrows();
    for _ in 0..LASSO_MAX_ITERS {
        let mut max_change: f64 = 0.0;
        for k in 0..p {
            if k == j {
                continue;
            }
            let partial: f64 = (0..p)
                .filter(|&l| l != j && l != k)
                .map(|l| w[(k, l)] * beta[l])
                .sum();
            let r = s[(k, j)] - partial;
            let new = r.signum() * (r.abs() - lambda).max(0.0) / w[(k, k)];
            max_change = max_change.max((new - beta[k]).abs());
            beta[k] = new;
        }
        if max_change < LASSO_TOL {
            break;
        }
    }
}

fn precision_from_regressions(w: &DMatrix<f64>, beta: &[DVector<f64>]) -> DMatrix<f64> {
    let p = w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let fitted: f64 = (0..p).filter(|&k| k != j).map(|k| w[(j, k)] * beta[j][k]).sum();
        let tjj = 1.0 / (w[(j, j)] - fitted);
        theta[(j, j)] = tjj;
        for k in 0..p {
            if k != j {
                theta[(k, j)] = -beta[j][k] * tjj;
            }
        }
    }
    linalg::symmetrize(&theta)
}

fn duality_gap(s: &DMatrix<f64>, w: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64) -> Option<f64> {
    let p = s.nrows() as f64;
    let primal = linalg::trace_product(s, theta) - linalg::logdet_spd(theta).ok()?
        + lambda * linalg::l1_norm(theta, false);
    let dual = linalg::logdet_spd(w).ok()? + p;
    Some(primal - dual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(s: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> f64 {
        linalg::trace_product(s, t) - linalg::logdet_spd(t).unwrap() + lambda * linalg::l1_norm(t, false)
    }

    #[test]
    fn identity_is_fixed_point() {
        for lambda in [0.01, 0.5, 3.0] {
            let t = reference_glasso(&DMatrix::identity(5, 5), lambda).unwrap();
            assert!((t - DMatrix::<f64>::identity(5, 5)).norm() < 1e-9);
        }
    }

    #[test]
    fn large_penalty_decouples() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.2, 0.3, 0.5, 0.1, -0.2, 0.1, 1.0]);
        let t = reference_glasso(&s, 10.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / s[(i, i)] } else { 0.0 };
                assert!((t[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_by_two_matches_grid_search() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let lambda = 0.1;
        let t = reference_glasso(&s, lambda).unwrap();

        // Symmetric problem: Θ = [[a, b], [b, a]]. Coarse grid, then shrink.
        let f = |a: f64, b: f64| {
            if a <= b.abs() {
                return f64::INFINITY;
            }
            let m = DMatrix::from_row_slice(2, 2, &[a, b, b, a]);
            objective(&s, &m, lambda)
        };
        let (mut a0, mut b0, mut step) = (1.0, 0.0, 0.5);
        for _ in 0..60 {
            let mut best = (f(a0, b0), a0, b0);
            for ia in -10..=10 {
                for ib in -10..=10 {
                    let (a, b) = (a0 + ia as f64 * step / 10.0, b0 + ib as f64 * step / 10.0);
                    let v = f(a, b);
                    if v < best.0 {
                        best = (v, a, b);
                    }
                }
            }
            a0 = best.1;
            b0 = best.2;
            step *= 0.5;
        }
        assert!((t[(0, 0)] - a0).abs() < 1e-6, "{} vs {a0}", t[(0, 0)]);
        assert!((t[(0, 1)] - b0).abs() < 1e-6, "{} vs {b0}", t[(0, 1)]);
        // Closed form: W₁₂ = 0.5 − λ, Θ = W⁻¹.
        assert!((t[(0, 1)] + 0.4 / 0.84).abs() < 1e-8);
        assert!((t[(0, 0)] - 1.0 / 0.84).abs() < 1e-8);
    }

    #[test]
    fn stationarity_holds_on_random_covariance() {
        let x = DMatrix::from_fn(40, 6, |i, j| ((i * 13 + j * 7) as f64 * 0.37).sin() + 0.1 * j as f64);
        let s = x.tr_mul(&x) / 40.0;
        let lambda = 0.05;
        let fit = reference_glasso_fit(&s, lambda).unwrap();
        assert!(fit.gap.abs() < 1e-6);
        // Sub-gradient conditions on the off-diagonal.
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    continue;
                }
                let r = fit.covariance[(i, j)] - s[(i, j)];
                if fit.theta[(i, j)].abs() > 1e-8 {
                    assert!((r - lambda * fit.theta[(i, j)].signum()).abs() < 1e-5);
                } else {
                    assert!(r.abs() <= lambda + 1e-6);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(reference_glasso(&DMatrix::zeros(2, 3), 0.1).is_err());
        assert!(reference_glasso(&DMatrix::identity(2, 2), -0.1).is_err());
        assert!(reference_glasso(&DMatrix::zeros(2, 2), 0.1).is_err());
    }
}
