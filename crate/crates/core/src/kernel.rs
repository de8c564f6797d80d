//! Kernel predictors with a sigmoidal transfer, learned two ways.
//!
//! - [`erm_convex`]: linear predictors of bounded norm under the transformed
//!   kernel `2 / (2 - k)`, fit by projected subgradient descent on the mean
//!   absolute loss. Everything is kernelized; the feature map is never built.
//! - [`erm_subset_search`]: the exhaustive reference for sigmoid predictors.
//!   Every subset of a fixed size is treated as noise-free, the transfer is
//!   inverted on its labels, and the resulting linear system in the subset's
//!   span gives a candidate scored on the full sample.

use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::par::{self, Execution};

/// Ceiling applied to the norm bound `(L / eps)^L`.
pub const MAX_NORM_BOUND: f64 = 1e6;
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;
/// Tolerance on the `|k| <= 1` range check, absorbing rounding in the base
/// kernel.
const RANGE_SLACK: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-8;

pub trait Kernel: Send + Sync {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64>;

    fn name(&self) -> String;
}

/// `<a, b> / (|a| |b|)`, zero when either vector is zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizedLinear;

impl Kernel for NormalizedLinear {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_len(a.len(), b.len())?;
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Ok(0.0);
        }
        Ok((dot / (na * nb)).clamp(-1.0, 1.0))
    }

    fn name(&self) -> String {
        "normalized-linear".into()
    }
}

/// `exp(-|a - b|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    pub sigma: f64,
}

impl Kernel for Gaussian {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_len(a.len(), b.len())?;
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        Ok((-d2 / (2.0 * self.sigma * self.sigma)).exp())
    }

    fn name(&self) -> String {
        format!("gaussian-{}", self.sigma)
    }
}

/// `2 / (2 - k)` for `k` in `[-1, 1]`; the result lies in `[2/3, 2]`.
pub fn transform_value(k: f64) -> Result<f64> {
    if !(-1.0 - RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&k) {
        return Err(Error::KernelDomain { value: k });
    }
    Ok(2.0 / (2.0 - k.clamp(-1.0, 1.0)))
}

pub struct Transformed {
    base: Arc<dyn Kernel>,
}

impl Kernel for Transformed {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        transform_value(self.base.eval(a, b)?)
    }

    fn name(&self) -> String {
        format!("transformed({})", self.base.name())
    }
}

pub fn transformed_kernel(base: Arc<dyn Kernel>) -> Arc<dyn Kernel> {
    Arc::new(Transformed { base })
}

/// Kernel selection as it appears in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    NormalizedLinear,
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> Arc<dyn Kernel> {
        match *self {
            KernelSpec::NormalizedLinear => Arc::new(NormalizedLinear),
            KernelSpec::Gaussian { sigma } => Arc::new(Gaussian { sigma }),
        }
    }
}

/// `phi(a) = 1 / (1 + exp(-4 L a))`, an `L`-Lipschitz map into `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidTransfer {
    pub l: f64,
}

impl SigmoidTransfer {
    pub fn eval(&self, a: f64) -> f64 {
        1.0 / (1.0 + (-4.0 * self.l * a).exp())
    }

    /// Inverse on `(0, 1)`; inputs are clamped `delta` away from the ends.
    pub fn inverse(&self, p: f64, delta: f64) -> f64 {
        let p = p.clamp(delta, 1.0 - delta);
        (p / (1.0 - p)).ln() / (4.0 * self.l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl KernelData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        check_len(x.len(), y.len())?;
        if let Some(first) = x.first() {
            for row in &x {
                check_len(first.len(), row.len())?;
            }
        }
        if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("labels must lie in [0, 1]".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Reads a headered CSV whose last column is the label.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{f:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let (label, features) = vals
                .split_last()
                .ok_or_else(|| Error::Parse("empty CSV record".into()))?;
            x.push(features.to_vec());
            y.push(*label);
        }
        Self::new(x, y)
    }
}

pub fn gram(kernel: &dyn Kernel, xs: &[Vec<f64>], exec: Execution) -> Result<DMatrix<f64>> {
    let m = xs.len();
    let rows: Vec<Result<Vec<f64>>> = par::map_indexed(exec, m, |i| {
        (0..m).map(|j| kernel.eval(&xs[i], &xs[j])).collect()
    });
    let mut g = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            g[(i, j)] = v;
        }
    }
    Ok(g)
}

pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    if k.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(k.clone()).eigenvalues.min()
}

/// Mean absolute loss `(1/m) sum_i |y_i - (K a)_i|`.
pub fn dual_objective(k: &DMatrix<f64>, y: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    (y - k * alpha).abs().mean()
}

/// Subgradient of [`dual_objective`] with respect to the coefficients:
/// `-(1/m) K sign(y - K a)`, taking `sign(0) = 0`.
pub fn dual_subgradient(k: &DMatrix<f64>, y: &DVector<f64>, alpha: &DVector<f64>) -> DVector<f64> {
    let m = y.len() as f64;
    let signs = (y - k * alpha).map(sign);
    -(k.transpose() * signs) / m
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Output {
    /// Linear score clipped to `[0, 1]`.
    Clipped,
    Sigmoid(SigmoidTransfer),
}

#[derive(Clone)]
pub struct DualPredictor {
    pub support: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub bound: f64,
    pub kernel: Arc<dyn Kernel>,
    pub output: Output,
}

impl std::fmt::Debug for DualPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DualPredictor")
            .field("support", &self.support.len())
            .field("alpha", &self.alpha)
            .field("bound", &self.bound)
            .field("kernel", &self.kernel.name())
            .field("output", &self.output)
            .finish()
    }
}

impl DualPredictor {
    /// `sum_i alpha_i k(x_i, x)`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.support
            .iter()
            .zip(&self.alpha)
            .filter(|(_, &a)| a != 0.0)
            .map(|(s, &a)| Ok(a * self.kernel.eval(s, x)?))
            .sum()
    }

    /// Probability of predicting the positive label.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        let s = self.score(x)?;
        Ok(match self.output {
            Output::Clipped => s.clamp(0.0, 1.0),
            Output::Sigmoid(t) => t.eval(s),
        })
    }

    /// `alpha^T K alpha` over the support points.
    pub fn norm_sq(&self) -> Result<f64> {
        let k = gram(self.kernel.as_ref(), &self.support, Execution::Sequential)?;
        let a = DVector::from_column_slice(&self.alpha);
        Ok(a.dot(&(&k * &a)))
    }

    /// Mean `|y - predict_prob(x)|`.
    pub fn loss(&self, data: &KernelData) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (x, y) in data.x.iter().zip(&data.y) {
            total += (y - self.predict_prob(x)?).abs();
        }
        Ok(total / data.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBound {
    pub value: f64,
    pub clamped: bool,
}

/// `multiplier * (L / eps)^L`, clamped at [`MAX_NORM_BOUND`].
pub fn norm_bound(l: f64, eps: f64, multiplier: f64) -> NormBound {
    let raw = multiplier * (l / eps).powf(l);
    if raw > MAX_NORM_BOUND {
        NormBound {
            value: MAX_NORM_BOUND,
            clamped: true,
        }
    } else {
        NormBound {
            value: raw,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub steps: usize,
    /// Step size at iteration `t` is `step_scale / sqrt(t)`.
    pub step_scale: f64,
    pub exec: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            step_scale: 1.0,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// Best objective so far, one entry per iteration (entry 0 is the start).
    pub best_objective: Vec<f64>,
    pub min_eigenvalue: f64,
}

/// Projected subgradient descent on the mean absolute loss over
/// `{alpha : alpha^T K alpha <= B^2}`, returning the best iterate.
///
/// Steps are taken along the function-space subgradient, whose coefficients are
/// `-(1/m) sign(y - K alpha)`; this is [`dual_subgradient`] preconditioned by
/// `K^{-1}`. Projection onto the norm ball is then an exact rescaling.
pub fn erm_convex(
    data: &KernelData,
    kernel: Arc<dyn Kernel>,
    bound: f64,
    cfg: SolverConfig,
) -> Result<(DualPredictor, SolveTrace)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if bound < 0.0 {
        return Err(Error::InvalidArgument(
            "norm bound must be non-negative".into(),
        ));
    }
    let m = data.len();
    let k = gram(kernel.as_ref(), &data.x, cfg.exec)?;
    let scale = k.diagonal().abs().max().max(1.0);
    let min_eig = min_eigenvalue(&k);
    if min_eig < -PSD_TOLERANCE * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
        });
    }
    let y = DVector::from_column_slice(&data.y);
    let mut alpha = DVector::zeros(m);
    let mut best_alpha = alpha.clone();
    let mut best = dual_objective(&k, &y, &alpha);
    let mut trace = vec![best];
    if bound > 0.0 {
        let mut kalpha = DVector::zeros(m);
        for t in 1..=cfg.steps {
            let eta = cfg.step_scale / (t as f64).sqrt();
            let signs = (&y - &kalpha).map(sign);
            alpha.axpy(eta / m as f64, &signs, 1.0);
            kalpha = &k * &alpha;
            let nsq = alpha.dot(&kalpha);
            if nsq > bound * bound {
                let shrink = bound / nsq.sqrt();
                alpha *= shrink;
                kalpha *= shrink;
            }
            let obj = (&y - &kalpha).abs().mean();
            if obj < best {
                best = obj;
                best_alpha.copy_from(&alpha);
            }
            trace.push(best);
        }
    }
    let pred = DualPredictor {
        support: data.x.clone(),
        alpha: best_alpha.iter().copied().collect(),
        bound,
        kernel,
        output: Output::Clipped,
    };
    Ok((
        pred,
        SolveTrace {
            best_objective: trace,
            min_eigenvalue: min_eig,
        },
    ))
}

/// Subset size `(L / eps)^2`, rounded up (with slack for float noise).
pub fn subset_size(l: f64, eps: f64) -> usize {
    ((l / eps).powi(2) - 1e-9).ceil().max(1.0) as usize
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Best sigmoid predictor over all `size`-subsets. For each subset the
/// transfer is inverted on its labels, the subset Gram system is solved by
/// pseudo-inverse, and the solution is rescaled into the unit ball before being
/// scored on all of `data`. Ties keep the first subset in lexicographic order.
pub fn erm_subset_search(
    data: &KernelData,
    kernel: Arc<dyn Kernel>,
    transfer: SigmoidTransfer,
    size: usize,
    cap: u128,
    exec: Execution,
) -> Result<DualPredictor> {
    let m = data.len();
    if m == 0 {
        return Err(Error::EmptyData);
    }
    let size = size.clamp(1, m);
    let count = binomial(m, size);
    if count > cap {
        return Err(Error::CombinatorialCap { count, cap });
    }
    let k = gram(kernel.as_ref(), &data.x, exec)?;
    let targets: Vec<f64> = data.y.iter().map(|&y| transfer.inverse(y, 1e-6)).collect();

    let fit = |subset: &[usize]| -> (f64, Vec<f64>) {
        let ks = DMatrix::from_fn(size, size, |a, b| k[(subset[a], subset[b])]);
        let rhs = DVector::from_iterator(size, subset.iter().map(|&i| targets[i]));
        let mut beta = ks
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-10)
            .unwrap_or_else(|_| DVector::zeros(size));
        let nsq = beta.dot(&(&ks * &beta));
        if nsq > 1.0 {
            beta /= nsq.sqrt();
        }
        let mut loss = 0.0;
        for i in 0..m {
            let s: f64 = subset
                .iter()
                .zip(beta.iter())
                .map(|(&j, b)| b * k[(j, i)])
                .sum();
            loss += (data.y[i] - transfer.eval(s)).abs();
        }
        (loss / m as f64, beta.iter().copied().collect())
    };

    let subsets: Vec<Vec<usize>> = (0..m).combinations(size).collect();
    let fits = par::map_slice(exec, &subsets, |s| fit(s));
    let (best_idx, _) = fits
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, (loss, _))| {
            if *loss < acc.1 {
                (i, *loss)
            } else {
                acc
            }
        });
    let subset = &subsets[best_idx];
    Ok(DualPredictor {
        support: subset.iter().map(|&i| data.x[i].clone()).collect(),
        alpha: fits[best_idx].1.clone(),
        bound: 1.0,
        kernel,
        output: Output::Sigmoid(transfer),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(m: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn transform_anchors_and_domain() {
        assert_eq!(transform_value(0.0).unwrap(), 1.0);
        assert_eq!(transform_value(1.0).unwrap(), 2.0);
        assert_eq!(transform_value(-1.0).unwrap(), 2.0 / 3.0);
        assert!(matches!(
            transform_value(1.5),
            Err(Error::KernelDomain { .. })
        ));
        let mut prev = 0.0;
        for i in 0..=200 {
            let v = transform_value(-1.0 + i as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn base_kernels_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = points(30, 4, &mut rng);
        let base: [Arc<dyn Kernel>; 2] = [
            Arc::new(NormalizedLinear),
            Arc::new(Gaussian { sigma: 0.7 }),
        ];
        for k in base {
            for a in &xs {
                assert!(k.eval(a, a).unwrap() <= 1.0 + 1e-12);
                for b in &xs {
                    let v = k.eval(a, b).unwrap();
                    assert!(v.abs() <= 1.0);
                    assert_eq!(v, k.eval(b, a).unwrap());
                }
            }
            assert!(
                min_eigenvalue(&gram(k.as_ref(), &xs, Execution::Sequential).unwrap()) >= -1e-8
            );
            let t = transformed_kernel(k);
            assert!(min_eigenvalue(&gram(t.as_ref(), &xs, Execution::Parallel).unwrap()) >= -1e-8);
        }
    }

    #[test]
    fn sigmoid_properties() {
        let t = SigmoidTransfer { l: 1.5 };
        assert_eq!(t.eval(0.0), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = rng.random_range(-5.0..5.0);
            let h = 1e-6;
            let deriv = (t.eval(a + h) - t.eval(a - h)) / (2.0 * h);
            assert!(deriv <= t.l + 1e-6);
            if a.abs() < 3.0 {
                assert!((t.inverse(t.eval(a), 1e-12) - a).abs() < 1e-6);
            }
        }
        assert!((((t.eval(1e-7) - t.eval(-1e-7)) / 2e-7) - t.l).abs() < 1e-6);
    }

    fn planted(m: usize, seed: u64) -> (KernelData, Arc<dyn Kernel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kern = transformed_kernel(Arc::new(Gaussian { sigma: 1.0 }));
        let x = points(m, 3, &mut rng);
        let alpha: Vec<f64> = (0..m)
            .map(|_| rng.random_range(0.0..1.0) / (2.0 * m as f64))
            .collect();
        // kernel values are at most 2, so labels stay in [0, 1]
        let y = x
            .iter()
            .map(|q| {
                x.iter()
                    .zip(&alpha)
                    .map(|(p, a)| a * kern.eval(p, q).unwrap())
                    .sum()
            })
            .collect();
        (KernelData::new(x, y).unwrap(), kern)
    }

    #[test]
    fn planted_solution_is_recovered() {
        for (m, seed) in [(20, 10), (100, 11), (200, 12)] {
            let (data, kern) = planted(m, seed);
            let (pred, trace) = erm_convex(&data, kern, 100.0, SolverConfig::default()).unwrap();
            let loss = pred.loss(&data).unwrap();
            assert!(loss <= 1e-2, "m={m} loss={loss}");
            assert!((loss - trace.best_objective.last().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = 8;
        let kern = transformed_kernel(Arc::new(NormalizedLinear));
        let k = gram(
            kern.as_ref(),
            &points(m, 3, &mut rng),
            Execution::Sequential,
        )
        .unwrap();
        let y = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let h = 1e-7;
        let mut checked = 0;
        while checked < 20 {
            let alpha = DVector::from_fn(m, |_, _| rng.random_range(-0.3..0.3));
            if (&y - &k * &alpha).abs().min() < 1e-3 {
                continue;
            }
            let g = dual_subgradient(&k, &y, &alpha);
            let fd = DVector::from_fn(m, |i, _| {
                let mut e = DVector::zeros(m);
                e[i] = h;
                (dual_objective(&k, &y, &(&alpha + &e)) - dual_objective(&k, &y, &(&alpha - &e)))
                    / (2.0 * h)
            });
            assert!(
                (&g - &fd).norm() <= 1e-4 * g.norm().max(1e-12),
                "{g} vs {fd}"
            );
            checked += 1;
        }
    }

    #[test]
    fn zero_bound_gives_zero_predictor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = points(20, 3, &mut rng);
        let y: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        let data = KernelData::new(x, y.clone()).unwrap();
        let (pred, _) = erm_convex(
            &data,
            transformed_kernel(Arc::new(NormalizedLinear)),
            0.0,
            SolverConfig::default(),
        )
        .unwrap();
        assert!(pred.alpha.iter().all(|&a| a == 0.0));
        assert_eq!(pred.predict_prob(&data.x[0]).unwrap(), 0.0);
        let mean_y = y.iter().sum::<f64>() / 20.0;
        assert!((pred.loss(&data).unwrap() - mean_y).abs() < 1e-12);
    }

    #[test]
    fn best_objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = points(40, 3, &mut rng);
        let y: Vec<f64> = (0..40).map(|_| rng.random()).collect();
        let data = KernelData::new(x, y).unwrap();
        let (pred, trace) = erm_convex(
            &data,
            transformed_kernel(Arc::new(Gaussian { sigma: 1.0 })),
            2.0,
            SolverConfig {
                steps: 300,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(trace.best_objective.windows(2).all(|w| w[1] <= w[0]));
        assert!(pred.norm_sq().unwrap() <= 4.0 + 1e-6);
    }

    struct Indefinite;
    impl Kernel for Indefinite {
        fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
            Ok(if a == b { 0.0 } else { 1.0 })
        }
        fn name(&self) -> String {
            "indefinite".into()
        }
    }

    #[test]
    fn non_psd_gram_is_rejected() {
        let data =
            KernelData::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 0.5]).unwrap();
        let err =
            erm_convex(&data, Arc::new(Indefinite), 1.0, SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
        assert!(err.to_string().contains("jitter"));
    }

    #[test]
    fn predict_prob_forms() {
        let p = DualPredictor {
            support: vec![vec![1.0, 0.0]],
            alpha: vec![0.0],
            bound: 1.0,
            kernel: Arc::new(NormalizedLinear),
            output: Output::Clipped,
        };
        assert_eq!(p.predict_prob(&[1.0, 1.0]).unwrap(), 0.0);
        let sig = DualPredictor {
            output: Output::Sigmoid(SigmoidTransfer { l: 2.0 }),
            ..p.clone()
        };
        assert_eq!(sig.predict_prob(&[0.0, 1.0]).unwrap(), 0.5);
        let mut prev = -1.0;
        for a in [0.0, 0.1, 0.2, 0.5] {
            let q = DualPredictor {
                alpha: vec![a],
                ..p.clone()
            };
            let v = q.score(&[1.0, 0.5]).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn subset_search_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kern: Arc<dyn Kernel> = Arc::new(NormalizedLinear);
        let t = SigmoidTransfer { l: 1.0 };
        let x = points(12, 3, &mut rng);
        let w = [0.6, -0.5, 0.3];
        let y: Vec<f64> = x
            .iter()
            .map(|p| {
                let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                t.eval(p.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / n)
            })
            .collect();
        let data = KernelData::new(x, y).unwrap();

        // whole-sample subset
        let all = erm_subset_search(
            &data,
            kern.clone(),
            t,
            12,
            DEFAULT_SUBSET_CAP,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(all.support.len(), 12);

        let best = erm_subset_search(
            &data,
            kern.clone(),
            t,
            3,
            DEFAULT_SUBSET_CAP,
            Execution::Sequential,
        )
        .unwrap();
        let best_loss = best.loss(&data).unwrap();
        // planted realizable target: three generic points pin down w exactly
        assert!(best_loss < 1e-6, "{best_loss}");
        assert!(best.norm_sq().unwrap() <= 1.0 + 1e-6);
        assert!(best_loss <= all.loss(&data).unwrap() + 1e-12);

        assert!(matches!(
            erm_subset_search(&data, kern, t, 3, 100, Execution::Sequential),
            Err(Error::CombinatorialCap {
                count: 220,
                cap: 100
            })
        ));
    }

    #[test]
    fn sizes_and_bounds() {
        assert_eq!(subset_size(2.0, 0.2), 100);
        assert_eq!(subset_size(1.0, 0.5), 4);
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(5, 7), 0);
        let b = norm_bound(2.0, 0.2, 1.0);
        assert!((b.value - 100.0).abs() < 1e-9 && !b.clamped);
        assert!(norm_bound(8.0, 0.01, 1.0).clamped);
    }

    #[test]
    fn csv_reader() {
        let data = KernelData::read_csv("f1,f2,label\n0.5,1.0,1\n-1,2,0.25\n".as_bytes()).unwrap();
        assert_eq!(data.x, vec![vec![0.5, 1.0], vec![-1.0, 2.0]]);
        assert_eq!(data.y, vec![1.0, 0.25]);
        assert!(KernelData::read_csv("a,label\n1,2\n".as_bytes()).is_err());
    }
}
