//! Shapiro-Wilk normality diagnostic (Royston's approximation, valid for
//! 3 ≤ n ≤ 5000). Used only to report how many columns look Gaussian before
//! and after the nonparanormal transform.

use crate::error::{Error, Result};
use crate::gaussianize::ObservationMatrix;
use crate::normal::{normal_cdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidArgument(format!("Shapiro-Wilk needs 3..=5000 samples, got {n}")));
    }
    let mut x: Vec<f64> = sample.to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "Shapiro-Wilk sample".into() });
    }
    x.sort_by(f64::total_cmp);
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if ss <= 0.0 {
        return Err(Error::InvalidArgument("Shapiro-Wilk sample is constant".into()));
    }

    let a = coefficients(n)?;
    let num: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
    let w = (num * num / ss).min(1.0);

    let p_value = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        (pi6 * (w.sqrt().asin() - 0.75f64.sqrt().asin())).max(0.0)
    } else if n <= 11 {
        let nf = n as f64;
        let gamma = poly(&[-2.273, 0.459], nf);
        let m = poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf);
        let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
        let z = (-(gamma - (1.0 - w).ln()).ln() - m) / s;
        1.0 - normal_cdf(z)
    } else {
        let ln_n = (n as f64).ln();
        let m = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
        let s = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
        let z = ((1.0 - w).ln() - m) / s;
        1.0 - normal_cdf(z)
    };
    Ok(ShapiroWilk { w, p_value })
}

fn coefficients(n: usize) -> Result<Vec<f64>> {
    if n == 3 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        return Ok(vec![-h, 0.0, h]);
    }
    let nf = n as f64;
    let m: Vec<f64> = (1..=n)
        .map(|i| normal_quantile((i as f64 - 0.375) / (nf + 0.25)))
        .collect::<Result<_>>()?;
    let mm: f64 = m.iter().map(|v| v * v).sum();
    let u = 1.0 / nf.sqrt();
    let an = poly(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], u) + m[n - 1] / mm.sqrt();
    let mut a = vec![0.0; n];
    if n > 5 {
        let an1 =
            poly(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], u) + m[n - 2] / mm.sqrt();
        let phi = (mm - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2))
            / (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
        for i in 2..n - 2 {
            a[i] = m[i] / phi.sqrt();
        }
        a[n - 2] = an1;
        a[1] = -an1;
    } else {
        let phi = (mm - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * an * an);
        for i in 1..n - 1 {
            a[i] = m[i] / phi.sqrt();
        }
    }
    a[n - 1] = an;
    a[0] = -an;
    Ok(a)
}

/// Fraction of columns whose Shapiro-Wilk p-value is at least `alpha`.
/// Constant columns count as failures.
pub fn normality_pass_rate(obs: &ObservationMatrix, alpha: f64) -> Result<f64> {
    let p = obs.n_nodes();
    let mut passed = 0usize;
    for j in 0..p {
        let col: Vec<f64> = obs.data().column(j).iter().cloned().collect();
        match shapiro_wilk(&col) {
            Ok(t) if t.p_value >= alpha => passed += 1,
            Ok(_) => {}
            Err(Error::InvalidArgument(_)) if col.len() >= 3 => {}
            Err(e) => return Err(e),
        }
    }
    Ok(passed as f64 / p as f64)
}
