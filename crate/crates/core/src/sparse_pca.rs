//! Support recovery under a spiked covariance `I + z z^T` with `k`-sparse `z`.

use std::io::{Read, Write};
use std::time::Instant;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::binomial;
use crate::par::{self, Execution};

pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;
/// Calibrated constant in `m = c k^2 ln(d - k)`; see README.
pub const DEFAULT_THRESHOLD_CONSTANT: f64 = 16.0;
const POWER_ITERATIONS: usize = 200;
const POWER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpikedModel {
    d: usize,
    support: Vec<usize>,
    signs: Vec<f64>,
}

impl SpikedModel {
    /// Explicit support (any order) and signs (`+1` / `-1`).
    pub fn new(d: usize, support: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != signs.len() {
            return Err(Error::InvalidArgument(
                "support and signs must be non-empty and equal length".into(),
            ));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(signs).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) || pairs.last().is_some_and(|p| p.0 >= d) {
            return Err(Error::InvalidArgument(
                "support indices must be distinct and < d".into(),
            ));
        }
        if pairs.iter().any(|p| p.1.abs() != 1.0) {
            return Err(Error::InvalidArgument("signs must be +1 or -1".into()));
        }
        let (support, signs) = pairs.into_iter().unzip();
        Ok(Self { d, support, signs })
    }

    /// Uniform random support of size `k` with uniform signs.
    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k <= d, got k={k}, d={d}"
            )));
        }
        let support = sample_indices(rng, d, k).into_vec();
        let signs = (0..k)
            .map(|_| if rng.random() { 1.0 } else { -1.0 })
            .collect();
        Self::new(d, support, signs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    /// Sorted support indices.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn z(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.d);
        let scale = 1.0 / (self.k() as f64).sqrt();
        for (&i, &s) in self.support.iter().zip(&self.signs) {
            z[i] = s * scale;
        }
        z
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let z = self.z();
        DMatrix::identity(self.d, self.d) + &z * z.transpose()
    }
}

/// `m` rows `g + xi z`, with `g` standard normal in `R^d` and `xi` an independent
/// standard normal scalar, so each row has covariance `I + z z^T`.
pub fn sample_gaussian<R: Rng + ?Sized>(
    model: &SpikedModel,
    m: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let z = model.z();
    let d = model.d;
    let mut x = DMatrix::zeros(m, d);
    for r in 0..m {
        for c in 0..d {
            x[(r, c)] = rng.sample(StandardNormal);
        }
        let xi: f64 = rng.sample(StandardNormal);
        for &c in &model.support {
            x[(r, c)] += xi * z[c];
        }
    }
    Ok(x)
}

/// `X^T X / m` (the model is centered, so no mean is removed).
pub fn second_moment(samples: &DMatrix<f64>) -> DMatrix<f64> {
    samples.transpose() * samples / samples.nrows() as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryResult {
    pub support: Vec<usize>,
    pub exact: bool,
    pub overlap: usize,
}

impl RecoveryResult {
    pub fn compare(mut support: Vec<usize>, truth: &SpikedModel) -> Self {
        support.sort_unstable();
        let overlap = support
            .iter()
            .filter(|i| truth.support.binary_search(i).is_ok())
            .count();
        Self {
            exact: overlap == truth.k() && support.len() == truth.k(),
            overlap,
            support,
        }
    }
}

/// Indices of the `k` largest entries, ties to the lower index; sorted.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Top-`k` coordinates by empirical second moment.
pub fn diagonal_thresholding(samples: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let d = samples.ncols();
    if k > d {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds d = {d}")));
    }
    let m = samples.nrows() as f64;
    let diag: Vec<f64> = samples
        .column_iter()
        .map(|c| c.norm_squared() / m)
        .collect();
    Ok(top_k(&diag, k))
}

/// Same as [`diagonal_thresholding`] but reading the diagonal of a given
/// covariance (exact or estimated).
pub fn threshold_covariance(cov: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let diag: Vec<f64> = cov.diagonal().iter().copied().collect();
    top_k(&diag, k)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn top_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Fixed, non-symmetric start so sign patterns of the spike are not
    // orthogonal to it.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i * 7 + 3) % 11) as f64);
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = a * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        let done = (next - lambda).abs() <= POWER_TOLERANCE * next.abs().max(1e-300);
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Support maximizing the top eigenvalue of the `k x k` principal submatrix of
/// `cov`, over all `C(d, k)` candidates.
pub fn exhaustive_support_covariance(
    cov: &DMatrix<f64>,
    k: usize,
    cap: u128,
) -> Result<Vec<usize>> {
    let d = cov.nrows();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= d, got k={k}, d={d}"
        )));
    }
    let count = binomial(d, k);
    if count > cap {
        return Err(Error::CombinatorialCap { count, cap });
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for cand in (0..d).combinations(k) {
        let sub = DMatrix::from_fn(k, k, |a, b| cov[(cand[a], cand[b])]);
        let lambda = top_eigenvalue(&sub);
        if lambda > best.0 {
            best = (lambda, cand);
        }
    }
    Ok(best.1)
}

pub fn exhaustive_support_oracle(samples: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    exhaustive_support_covariance(&second_moment(samples), k, DEFAULT_ORACLE_CAP)
}

/// `ceil(c k^2 ln(d - k))`, at least 1.
pub fn threshold_sample_size(c: f64, d: usize, k: usize) -> usize {
    let gap = (d - k).max(2) as f64;
    (c * (k * k) as f64 * gap.ln()).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMethod {
    Thresholding,
    Oracle,
}

impl SupportMethod {
    pub fn recover(self, samples: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
        match self {
            SupportMethod::Thresholding => diagonal_thresholding(samples, k),
            SupportMethod::Oracle => exhaustive_support_oracle(samples, k),
        }
    }
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub method: SupportMethod,
    pub trial: usize,
    pub exact: bool,
    pub overlap: usize,
    pub time_ns: u64,
}

/// Independent trials, each on a fresh model and sample drawn from ChaCha
/// stream `trial` of `seed`. Only the recovery step is timed.
pub fn recovery_trials(
    d: usize,
    k: usize,
    m: usize,
    method: SupportMethod,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RecoveryRecord>> {
    par::map_indexed(exec, trials, |trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let model = SpikedModel::random(d, k, &mut rng)?;
        let x = sample_gaussian(&model, m, &mut rng)?;
        let start = Instant::now();
        let support = method.recover(&x, k)?;
        let time_ns = (start.elapsed().as_nanos() as u64).max(1);
        let r = RecoveryResult::compare(support, &model);
        Ok(RecoveryRecord {
            d,
            k,
            m,
            method,
            trial,
            exact: r.exact,
            overlap: r.overlap,
            time_ns,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_results<W: Write>(out: W, records: &[RecoveryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<RecoveryRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
