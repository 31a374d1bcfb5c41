//! Distribution functions and small descriptive helpers shared by the test
//! batteries.

use alloc::vec::Vec;
use libm::{erfc, exp, fabs, lgamma, log, sqrt};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / core::f64::consts::SQRT_2)
}

/// Two-sided normal tail probability of `|Z| >= |z|`.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(fabs(z) / core::f64::consts::SQRT_2).min(1.0)
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if fabs(term) < fabs(sum) * 1e-16 {
            break;
        }
    }
    sum * exp(-x + a * log(x) - lgamma(a))
}

// Lentz's method.
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if fabs(delta - 1.0) < 1e-16 {
            break;
        }
    }
    exp(-x + a * log(x) - lgamma(a)) * h
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(statistic: f64, dof: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * dof, 0.5 * statistic).clamp(0.0, 1.0)
}

/// Upper tail of the chi-square distribution with an even number `2k` of
/// degrees of freedom, via the finite Poisson sum.
pub fn chi2_sf_even(statistic: f64, k: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let half = 0.5 * statistic;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..k {
        term *= half / i as f64;
        sum += term;
    }
    (exp(-half) * sum).clamp(0.0, 1.0)
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sqrt(sample_variance(values))
}

/// Median with the average of the two central values for even lengths.
/// NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_routes_agree() {
        for &x in &[0.1, 1.0, 5.0, 11.98, 30.0] {
            for k in 1..6 {
                let a = chi2_sf(x, 2.0 * k as f64);
                let b = chi2_sf_even(x, k);
                assert!(fabs(a - b) < 1e-12, "x={x} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn chi2_one_dof_matches_normal_tail() {
        // P(chi2_1 > z^2) = P(|Z| > z)
        for &z in &[0.5, 1.0, 1.96, 3.0, 4.47] {
            let a = chi2_sf(z * z, 1.0);
            let b = normal_two_sided(z);
            assert!(fabs(a - b) < 1e-12 * b.max(1e-3), "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 5), Some(252));
        assert_eq!(binomial(4, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert!(fabs(ln_binomial(10, 5) - log(252.0)) < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
