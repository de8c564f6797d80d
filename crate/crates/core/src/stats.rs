//! Small statistics helpers shared by the Monte-Carlo checks.

/// A Monte-Carlo estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        assert!(trials > 0, "estimate needs at least one trial");
        let mean = hits as f64 / trials as f64;
        Self {
            mean,
            std_err: binomial_sigma(mean, trials),
            trials,
        }
    }

    /// True when `value` lies within `k` standard errors, where the standard
    /// error is taken at `value` itself (so degenerate means still get slack).
    pub fn within_sigmas_of(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * binomial_sigma(value, self.trials)
    }
}

/// Standard deviation of the mean of `trials` Bernoulli(p) draws.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

/// Median of a non-empty sample; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}
