//! Small statistics helpers shared by the estimators and test harnesses.

use std::collections::HashMap;
use std::hash::Hash;

/// Two-sided standard normal quantile for 95% intervals.
pub const Z95: f64 = 1.959963984540054;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Normal-approximation interval `mean ± z * sd / sqrt(n)`.
pub fn mean_ci(xs: &[f64], z: f64) -> (f64, f64, f64) {
    let m = mean(xs);
    let half = z * (variance(xs) / xs.len() as f64).sqrt();
    (m, m - half, m + half)
}

/// Batch-means interval for a correlated series: the series is cut into
/// `batches` contiguous blocks and the block means are treated as i.i.d.
pub fn batch_means_ci(xs: &[f64], batches: usize, z: f64) -> (f64, f64, f64) {
    let batches = batches.clamp(2, xs.len().max(2));
    let size = xs.len() / batches;
    if size == 0 {
        return mean_ci(xs, z);
    }
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    let (_, lo, hi) = mean_ci(&means, z);
    let m = mean(xs);
    let half = (hi - lo) / 2.0;
    (m, m - half, m + half)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Lag-`k` autocorrelation of a series.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    if lag >= xs.len() {
        return 0.0;
    }
    let m = mean(xs);
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (0..xs.len() - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    cov / var
}

/// Integrated autocorrelation time with the initial-positive-sequence cutoff.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let mut tau = 1.0;
    for lag in 1..xs.len() / 2 {
        let r = autocorrelation(xs, lag);
        if r <= 0.0 {
            break;
        }
        tau += 2.0 * r;
    }
    tau
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Total variation distance between an empirical count table and an exact law.
pub fn tv_distance<K: Eq + Hash>(counts: &HashMap<K, u64>, exact: &HashMap<K, f64>) -> f64 {
    let total: u64 = counts.values().sum();
    let mut d = 0.0;
    for (k, &p) in exact {
        let q = counts.get(k).copied().unwrap_or(0) as f64 / total as f64;
        d += (p - q).abs();
    }
    for (k, &c) in counts {
        if !exact.contains_key(k) {
            d += c as f64 / total as f64;
        }
    }
    d / 2.0
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width at confidence `1 - eps`.
pub fn dkw_epsilon(n: usize, eps: f64) -> f64 {
    ((2.0 / eps).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical survival function `P(X >= l)` for `l = 0..=max`.
pub fn empirical_survival(values: &[u64], max: usize) -> Vec<f64> {
    let mut counts = vec![0u64; max + 2];
    for &v in values {
        counts[(v as usize).min(max + 1)] += 1;
    }
    let n = values.len() as f64;
    let mut out = vec![0.0; max + 1];
    let mut at_least = counts[max + 1];
    for l in (0..=max).rev() {
        at_least += counts[l];
        out[l] = at_least as f64 / n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((quantile(&xs, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn survival_counts() {
        let s = empirical_survival(&[0, 1, 1, 3], 4);
        assert_eq!(s, vec![1.0, 0.75, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn tv_of_identical_laws_is_zero() {
        let counts: HashMap<u8, u64> = [(0, 50), (1, 50)].into_iter().collect();
        let exact: HashMap<u8, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        assert_eq!(tv_distance(&counts, &exact), 0.0);
    }
}
