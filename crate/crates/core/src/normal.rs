//! Standard normal distribution primitives.
//!
//! The quantile uses Wichura's AS241 (PPND16) rational approximations as the
//! starting point and polishes the result with one Halley step against the
//! CDF, which is evaluated through `erfc` for full double precision in both
//! tails.

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(p) for p in the open unit interval.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = ppnd16(p);
    // Halley refinement. The CDF error is taken from the tail that keeps it
    // well conditioned.
    let e = if x < 0.0 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_cdf(-x)
    };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// GELU in its exact form, x·Φ(x).
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_4 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414_1e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_3)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446_0e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// erf by its Maclaurin series; independent of libm, accurate for |x| < 3.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    fn quantile_by_bisection(p: f64) -> f64 {
        let cdf = |x: f64| 0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2));
        let (mut lo, mut hi) = (-4.0, 4.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn median_is_zero() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn upper_975_matches_bisection_oracle() {
        let oracle = quantile_by_bisection(0.975);
        assert!((oracle - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.975).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn one_sigma_lower_tail() {
        assert!((normal_quantile(0.1587).unwrap() + 1.0).abs() < 2e-3);
    }

    #[test]
    fn matches_bisection_across_body() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let diff = (normal_quantile(p).unwrap() - quantile_by_bisection(p)).abs();
            assert!(diff < 1e-10, "p={p} diff={diff}");
        }
    }

    #[test]
    fn deep_tails_round_trip_through_cdf() {
        for &p in &[1e-8, 1e-7, 3e-6, 1e-4, 0.02, 0.98, 1.0 - 1e-4, 1.0 - 1e-8] {
            let x = normal_quantile(p).unwrap();
            // Invert using the tail that is exactly representable.
            let back = if p < 0.5 { normal_cdf(x) } else { 1.0 - normal_cdf(-x) };
            let slope = normal_pdf(x);
            assert!(((back - p) / slope).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn antisymmetric() {
        for &p in &[0.01, 0.2, 0.3333, 0.49] {
            let a = normal_quantile(p).unwrap();
            let b = normal_quantile(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_closed_endpoints() {
        for &p in &[0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(p).is_err());
        }
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((gelu(-1.0) + 0.158_655_253_931_457_05).abs() < 1e-14);
    }
}
