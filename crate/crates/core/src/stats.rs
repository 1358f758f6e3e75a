//! Small statistical helpers shared across modules.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard normal quantile function Φ⁻¹(p).
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

pub fn normal_pdf(x: f64) -> f64 {
    standard_normal().pdf(x)
}

pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// 1-based rank `k` of the type-1 sample quantile: the smallest `k` with
/// `k / n >= tau`.
///
/// The comparison is done on `k as f64 / n as f64` so callers evaluating an
/// empirical CDF as `count / n` agree with it exactly.
pub fn type1_rank(n: usize, tau: f64) -> usize {
    debug_assert!(n > 0);
    let nf = n as f64;
    let mut k = ((tau * nf).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= tau {
        k -= 1;
    }
    while k < n && (k as f64) / nf < tau {
        k += 1;
    }
    k
}

/// Type-1 quantile of an ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], tau: f64) -> f64 {
    sorted[type1_rank(sorted.len(), tau) - 1]
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median of a non-empty slice (average of the two middle values when even).
pub fn median(values: &[f64]) -> f64 {
    let v = sorted_copy(values);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation about the median, scaled by 1.4826 so it
/// estimates σ under normality.
pub fn scaled_mad(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    1.4826 * median(&dev)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
