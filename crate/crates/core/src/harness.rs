//! Experiment engine: sweeps a grid of sample sizes, trains each configured
//! algorithm on fresh seeded data, and records training time and held-out
//! error per trial.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banditron::{self, OnlineAlgorithm, Stream, StreamConfig};
use crate::crypto::{self, CryptoDistribution, CryptoPredictor};
use crate::dnf::{self, ThreeDnf, TripleExpansion};
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::kernel::{self, KernelData, KernelSpec, SigmoidTransfer, SolverConfig};
use crate::learners;
use crate::owp::{
    BruteForce, PermutationKind, PermutationOracle, PermutationSpec, DEFAULT_BRUTE_FORCE_CAP,
};
use crate::par::{self, Execution};
use crate::preferences::{self, PairPredictor, PrefExample};
use crate::sparse_pca::{self, RecoveryResult, SpikedModel};
use crate::stats::{self, Estimate};

pub const EVAL_DRAWS: usize = 10_000;
pub const DEFAULT_TIME_BUDGET_SECS: f64 = 120.0;
pub const MAX_GL_M: usize = 20;
pub const CSV_HEADER: &str =
    "family,algorithm,n_or_d,m,epsilon,trial,seed,train_time_ns,eval_error,success";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub family: FamilyConfig,
    pub m_grid: Vec<usize>,
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_budget")]
    pub time_budget_secs: f64,
    #[serde(default)]
    pub exec: Execution,
}

fn default_trials() -> usize {
    1
}

fn default_budget() -> f64 {
    DEFAULT_TIME_BUDGET_SECS
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("m_grid must be strictly increasing".into()));
        }
        if self.m_grid.first() == Some(&0) {
            return Err(Error::Config("m_grid entries must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config("epsilon must be in (0, 1)".into()));
        }
        if self.time_budget_secs.is_nan() || self.time_budget_secs <= 0.0 {
            return Err(Error::Config("time_budget_secs must be positive".into()));
        }
        self.family.validate()
    }

    /// Non-fatal problems worth reporting before a run.
    pub fn warnings(&self) -> Vec<String> {
        match &self.family {
            FamilyConfig::Kernel(p) if p.algorithms.contains(&KernelAlgorithm::Convex) => {
                let b = kernel::norm_bound(p.l, self.epsilon, p.bound_multiplier);
                if b.clamped {
                    vec![format!("norm bound clamped to {}", b.value)]
                } else {
                    vec![]
                }
            }
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilyConfig {
    Crypto(CryptoParams),
    Dnf(DnfParams),
    Preferences(PreferenceParams),
    Kernel(KernelParams),
    SparsePca(SparsePcaParams),
    Banditron(BanditronParams),
}

impl FamilyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyConfig::Crypto(_) => "crypto",
            FamilyConfig::Dnf(_) => "dnf",
            FamilyConfig::Preferences(_) => "preferences",
            FamilyConfig::Kernel(_) => "kernel",
            FamilyConfig::SparsePca(_) => "sparse_pca",
            FamilyConfig::Banditron(_) => "banditron",
        }
    }

    pub fn n_or_d(&self) -> usize {
        match self {
            FamilyConfig::Crypto(p) => p.n,
            FamilyConfig::Dnf(p) => p.d,
            FamilyConfig::Preferences(p) => p.d,
            FamilyConfig::Kernel(p) => p.dim,
            FamilyConfig::SparsePca(p) => p.d,
            FamilyConfig::Banditron(p) => p.d,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        match self {
            FamilyConfig::Crypto(p) => {
                if p.n == 0 || p.n > 64 {
                    return bad("crypto n must be in 1..=64");
                }
            }
            FamilyConfig::Dnf(p) => {
                if p.d == 0 || p.min_literals > p.max_literals || p.max_literals > p.d {
                    return bad("dnf needs d >= 1 and min_literals <= max_literals <= d");
                }
            }
            FamilyConfig::Preferences(p) => {
                if p.d < 2 || !(0.0..0.5).contains(&p.noise) {
                    return bad("preferences need d >= 2 and noise in [0, 0.5)");
                }
            }
            FamilyConfig::Kernel(p) => {
                if p.dim == 0 || p.l.is_nan() || p.l <= 0.0 || p.anchors == 0 {
                    return bad("kernel needs dim >= 1, l > 0 and anchors >= 1");
                }
            }
            FamilyConfig::SparsePca(p) => {
                if p.k == 0 || p.k > p.d {
                    return bad("sparse_pca needs 1 <= k <= d");
                }
            }
            FamilyConfig::Banditron(p) => {
                p.stream(1).validate()?;
                if p.algorithms.contains(&BanditronAlgorithm::Halving)
                    && p.k * p.d > banditron::MAX_GRID_BITS
                {
                    return bad("halving needs k * d <= 20");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CryptoAlgorithm {
    Inefficient,
    Efficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CryptoParams {
    pub n: usize,
    #[serde(default = "default_permutation")]
    pub permutation: PermutationKind,
    #[serde(default)]
    pub permutation_seed: u64,
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default = "default_brute_force_cap")]
    pub brute_force_cap: usize,
    #[serde(default = "default_crypto_algorithms")]
    pub algorithms: Vec<CryptoAlgorithm>,
}

fn default_permutation() -> PermutationKind {
    PermutationKind::Feistel
}

fn default_brute_force_cap() -> usize {
    DEFAULT_BRUTE_FORCE_CAP
}

fn default_crypto_algorithms() -> Vec<CryptoAlgorithm> {
    vec![CryptoAlgorithm::Inefficient, CryptoAlgorithm::Efficient]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnfParams {
    pub d: usize,
    #[serde(default = "one")]
    pub min_literals: usize,
    #[serde(default = "three")]
    pub max_literals: usize,
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceAlgorithm {
    Lookup,
    OrderBruteforce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceParams {
    pub d: usize,
    /// Probability that a label is flipped.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_pref_algorithms")]
    pub algorithms: Vec<PreferenceAlgorithm>,
}

fn default_pref_algorithms() -> Vec<PreferenceAlgorithm> {
    vec![PreferenceAlgorithm::Lookup]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelAlgorithm {
    Convex,
    Subset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub dim: usize,
    pub l: f64,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    /// Number of anchor points defining the planted sigmoid target.
    #[serde(default = "three")]
    pub anchors: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "unit")]
    pub step_scale: f64,
    #[serde(default = "unit")]
    pub bound_multiplier: f64,
    #[serde(default = "default_kernel_algorithms")]
    pub algorithms: Vec<KernelAlgorithm>,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::NormalizedLinear
}

fn default_steps() -> usize {
    SolverConfig::default().steps
}

fn unit() -> f64 {
    1.0
}

fn default_kernel_algorithms() -> Vec<KernelAlgorithm> {
    vec![KernelAlgorithm::Convex]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMethod {
    Thresholding,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsePcaParams {
    pub d: usize,
    pub k: usize,
    #[serde(default = "default_pca_methods")]
    pub algorithms: Vec<PcaMethod>,
}

fn default_pca_methods() -> Vec<PcaMethod> {
    vec![PcaMethod::Thresholding]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditronAlgorithm {
    Banditron,
    Perceptron,
    Halving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditronParams {
    pub k: usize,
    pub d: usize,
    pub margin: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub gamma_explore: Option<f64>,
    #[serde(default = "default_bandit_algorithms")]
    pub algorithms: Vec<BanditronAlgorithm>,
}

fn default_bandit_algorithms() -> Vec<BanditronAlgorithm> {
    vec![
        BanditronAlgorithm::Banditron,
        BanditronAlgorithm::Perceptron,
    ]
}

impl BanditronParams {
    fn stream(&self, horizon: usize) -> StreamConfig {
        StreamConfig {
            k: self.k,
            d: self.d,
            margin: self.margin,
            horizon,
            noise: self.noise,
        }
    }
}

/// One trained-and-evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub family: String,
    pub algorithm: String,
    pub n_or_d: usize,
    pub m: usize,
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub train_time_ns: u64,
    pub eval_error: f64,
    pub success: bool,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of a sequence of labelled fields.
pub fn hash_seed(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for p in parts {
        h = fnv1a(h, &(p.len() as u64).to_le_bytes());
        h = fnv1a(h, p);
    }
    splitmix64(h)
}

/// Seed of the data drawn for one `(family, m, trial)`; shared by all
/// algorithms so they are compared on identical samples.
pub fn trial_seed(base: u64, family: &str, m: usize, trial: usize) -> u64 {
    hash_seed(&[
        &base.to_le_bytes(),
        family.as_bytes(),
        &(m as u64).to_le_bytes(),
        &(trial as u64).to_le_bytes(),
    ])
}

/// Seed for an algorithm's own randomness within a trial.
pub fn stream_seed(trial_seed: u64, purpose: &str) -> u64 {
    hash_seed(&[&trial_seed.to_le_bytes(), purpose.as_bytes()])
}

fn rng_for(trial_seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(trial_seed, purpose))
}

struct Outcome {
    algorithm: &'static str,
    time: Duration,
    eval_error: f64,
    success: bool,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, Duration)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed()))
}

/// Runs every `(m, trial)` of the sweep. Points come back ordered by `m`,
/// then trial, then algorithm in configuration order, whatever `exec` is.
pub fn run_curve(cfg: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let context = Context::new(cfg)?;
    let tasks: Vec<(usize, usize)> = cfg
        .m_grid
        .iter()
        .flat_map(|&m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    let family = cfg.family.name();
    let budget = Duration::from_secs_f64(cfg.time_budget_secs);
    let results = par::map_slice(cfg.exec, &tasks, |&(m, trial)| {
        let seed = trial_seed(cfg.base_seed, family, m, trial);
        let outcomes = context.run_trial(cfg, m, seed)?;
        Ok::<_, Error>(
            outcomes
                .into_iter()
                .map(|o| CurvePoint {
                    family: family.to_string(),
                    algorithm: o.algorithm.to_string(),
                    n_or_d: cfg.family.n_or_d(),
                    m,
                    epsilon: cfg.epsilon,
                    trial,
                    seed,
                    train_time_ns: (o.time.as_nanos() as u64).max(1),
                    eval_error: o.eval_error.clamp(0.0, 1.0),
                    success: o.success && o.time <= budget,
                })
                .collect::<Vec<_>>(),
        )
    });
    let mut points = Vec::new();
    for r in results {
        points.extend(r?);
    }
    Ok(points)
}

/// State shared by all trials of a run.
enum Context {
    Crypto(Arc<dyn PermutationOracle>),
    Other,
}

impl Context {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.family {
            FamilyConfig::Crypto(p) => {
                let spec = PermutationSpec {
                    kind: p.permutation,
                    n: p.n,
                    seed: p.permutation_seed,
                    rounds: p.rounds,
                };
                Context::Crypto(Arc::new(spec.build()?))
            }
            _ => Context::Other,
        })
    }

    fn run_trial(&self, cfg: &ExperimentConfig, m: usize, seed: u64) -> Result<Vec<Outcome>> {
        let eps = cfg.epsilon;
        match (&cfg.family, self) {
            (FamilyConfig::Crypto(p), Context::Crypto(perm)) => crypto_trial(p, perm, m, eps, seed),
            (FamilyConfig::Dnf(p), _) => dnf_trial(p, m, eps, seed),
            (FamilyConfig::Preferences(p), _) => preference_trial(p, m, eps, seed),
            (FamilyConfig::Kernel(p), _) => kernel_trial(p, m, eps, seed),
            (FamilyConfig::SparsePca(p), _) => sparse_pca_trial(p, m, seed),
            (FamilyConfig::Banditron(p), _) => banditron_trial(p, m, eps, seed),
            (FamilyConfig::Crypto(_), Context::Other) => {
                unreachable!("crypto context is built with the config")
            }
        }
    }
}

fn crypto_trial(
    p: &CryptoParams,
    perm: &Arc<dyn PermutationOracle>,
    m: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<Outcome>> {
    let mut data_rng = rng_for(seed, "data");
    let x = BitVec::random(p.n, &mut data_rng);
    let dist = CryptoDistribution::hard(x, perm.clone())?;
    let data = crypto::sample(&dist, m, &mut data_rng);
    let best = dist.best_in_class_error();
    p.algorithms
        .iter()
        .map(|alg| {
            let (pred, time, name): (Box<dyn CryptoPredictor>, _, _) = match alg {
                CryptoAlgorithm::Inefficient => {
                    let bf = BruteForce {
                        cap: p.brute_force_cap,
                        exec: Execution::Sequential,
                    };
                    let ((h, _), t) =
                        timed(|| learners::train_inefficient(&data, perm.as_ref(), bf))?;
                    (Box::new(h), t, "inefficient")
                }
                CryptoAlgorithm::Efficient => {
                    let ((h, _), t) = timed(|| learners::train_efficient(&data))?;
                    (Box::new(h), t, "efficient")
                }
            };
            let err = pred
                .expected_error(&dist)
                .expect("both learners have closed-form error");
            Ok(Outcome {
                algorithm: name,
                time,
                eval_error: err,
                success: err - best <= eps,
            })
        })
        .collect()
}

fn dnf_trial(p: &DnfParams, m: usize, eps: f64, seed: u64) -> Result<Vec<Outcome>> {
    let mut data_rng = rng_for(seed, "data");
    let target = ThreeDnf::random(p.d, p.min_literals, p.max_literals, &mut data_rng);
    let xs: Vec<BitVec> = (0..m).map(|_| BitVec::random(p.d, &mut data_rng)).collect();
    let labels = xs
        .iter()
        .map(|x| target.eval(x))
        .collect::<Result<Vec<_>>>()?;
    let te = TripleExpansion::new(p.d);
    let (conj, time) = timed(|| {
        let psi = te.expand_all(&xs, Execution::Sequential)?;
        let data: Vec<(BitVec, bool)> = psi.into_iter().zip(labels).collect();
        dnf::greedy_conjunction_erm(te.dimension(), &data)
    })?;
    let mut eval_rng = rng_for(seed, "eval");
    let mut wrong = 0;
    for _ in 0..EVAL_DRAWS {
        let x = BitVec::random(p.d, &mut eval_rng);
        if conj.eval(&te.expand(&x)?)? != target.eval(&x)? {
            wrong += 1;
        }
    }
    let err = wrong as f64 / EVAL_DRAWS as f64;
    Ok(vec![Outcome {
        algorithm: "conjunction_erm",
        time,
        eval_error: err,
        success: err <= eps,
    }])
}

/// Uniform ordered pair of distinct items, labelled by `order` with label
/// noise.
fn preference_draw<R: Rng + ?Sized>(
    target: &preferences::WeightPredictor,
    noise: f64,
    rng: &mut R,
) -> PrefExample {
    let d = target.w.len();
    let i = rng.random_range(1..=d);
    let mut j = rng.random_range(1..d);
    if j >= i {
        j += 1;
    }
    let clean = target.predict(i, j);
    let flip = noise > 0.0 && rng.random::<f64>() < noise;
    PrefExample {
        i,
        j,
        label: clean != flip,
    }
}

fn preference_trial(p: &PreferenceParams, m: usize, eps: f64, seed: u64) -> Result<Vec<Outcome>> {
    let mut data_rng = rng_for(seed, "data");
    let mut order: Vec<usize> = (1..=p.d).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut data_rng);
    let target = preferences::WeightPredictor::from_order(&order);
    let data: Vec<PrefExample> = (0..m)
        .map(|_| preference_draw(&target, p.noise, &mut data_rng))
        .collect();
    let mut eval_rng = rng_for(seed, "eval");
    let held_out: Vec<PrefExample> = (0..EVAL_DRAWS)
        .map(|_| preference_draw(&target, p.noise, &mut eval_rng))
        .collect();
    p.algorithms
        .iter()
        .map(|alg| {
            let (pred, time, name): (Box<dyn PairPredictor>, _, _) = match alg {
                PreferenceAlgorithm::Lookup => {
                    let (h, t) = timed(|| preferences::lookup_erm(&data, p.d))?;
                    (Box::new(h), t, "lookup")
                }
                PreferenceAlgorithm::OrderBruteforce => {
                    let (h, t) = timed(|| preferences::weight_erm_bruteforce(&data, p.d))?;
                    (Box::new(h), t, "order_bruteforce")
                }
            };
            let err = preferences::eval_pref(pred.as_ref(), &held_out);
            Ok(Outcome {
                algorithm: name,
                time,
                eval_error: err,
                success: err - p.noise <= eps,
            })
        })
        .collect()
}

/// Sigmoid target `phi(sum_j beta_j k(z_j, x))` with `beta^T K_z beta = 1`.
pub struct PlantedSigmoid {
    pub anchors: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub kernel: Arc<dyn kernel::Kernel>,
    pub transfer: SigmoidTransfer,
}

impl PlantedSigmoid {
    pub fn random<R: Rng + ?Sized>(
        dim: usize,
        anchors: usize,
        kernel: Arc<dyn kernel::Kernel>,
        transfer: SigmoidTransfer,
        rng: &mut R,
    ) -> Result<Self> {
        let z: Vec<Vec<f64>> = (0..anchors).map(|_| uniform_point(dim, rng)).collect();
        let mut beta: Vec<f64> = (0..anchors)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        let g = kernel::gram(kernel.as_ref(), &z, Execution::Sequential)?;
        let b = nalgebra::DVector::from_column_slice(&beta);
        let nsq = b.dot(&(&g * &b));
        if nsq > 0.0 {
            beta.iter_mut().for_each(|v| *v /= nsq.sqrt());
        }
        Ok(Self {
            anchors: z,
            beta,
            kernel,
            transfer,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for (z, b) in self.anchors.iter().zip(&self.beta) {
            s += b * self.kernel.eval(z, x)?;
        }
        Ok(self.transfer.eval(s))
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<KernelData> {
        let dim = self.anchors.first().map_or(0, Vec::len);
        let x: Vec<Vec<f64>> = (0..m).map(|_| uniform_point(dim, rng)).collect();
        let y = x.iter().map(|p| self.eval(p)).collect::<Result<Vec<_>>>()?;
        KernelData::new(x, y)
    }
}

fn uniform_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn kernel_trial(p: &KernelParams, m: usize, eps: f64, seed: u64) -> Result<Vec<Outcome>> {
    let mut data_rng = rng_for(seed, "data");
    let base = p.kernel.build();
    let transfer = SigmoidTransfer { l: p.l };
    let target = PlantedSigmoid::random(p.dim, p.anchors, base.clone(), transfer, &mut data_rng)?;
    let data = target.sample(m, &mut data_rng)?;
    let held_out = target.sample(EVAL_DRAWS, &mut rng_for(seed, "eval"))?;
    p.algorithms
        .iter()
        .map(|alg| {
            let (pred, time, name) = match alg {
                KernelAlgorithm::Convex => {
                    let bound = kernel::norm_bound(p.l, eps, p.bound_multiplier).value;
                    let solver = SolverConfig {
                        steps: p.steps,
                        step_scale: p.step_scale,
                        exec: Execution::Sequential,
                    };
                    let kern = kernel::transformed_kernel(base.clone());
                    let ((h, _), t) = timed(|| kernel::erm_convex(&data, kern, bound, solver))?;
                    (h, t, "convex")
                }
                KernelAlgorithm::Subset => {
                    let size = kernel::subset_size(p.l, eps);
                    let (h, t) = timed(|| {
                        kernel::erm_subset_search(
                            &data,
                            base.clone(),
                            transfer,
                            size,
                            kernel::DEFAULT_SUBSET_CAP,
                            Execution::Sequential,
                        )
                    })?;
                    (h, t, "subset")
                }
            };
            let err = pred.loss(&held_out)?;
            Ok(Outcome {
                algorithm: name,
                time,
                eval_error: err,
                success: err <= eps,
            })
        })
        .collect()
}

fn sparse_pca_trial(p: &SparsePcaParams, m: usize, seed: u64) -> Result<Vec<Outcome>> {
    let mut data_rng = rng_for(seed, "data");
    let model = SpikedModel::random(p.d, p.k, &mut data_rng)?;
    let samples = sparse_pca::sample_gaussian(&model, m, &mut data_rng)?;
    p.algorithms
        .iter()
        .map(|alg| {
            let (support, time, name) = match alg {
                PcaMethod::Thresholding => {
                    let (s, t) = timed(|| sparse_pca::diagonal_thresholding(&samples, p.k))?;
                    (s, t, "thresholding")
                }
                PcaMethod::Oracle => {
                    let (s, t) = timed(|| sparse_pca::exhaustive_support_oracle(&samples, p.k))?;
                    (s, t, "oracle")
                }
            };
            let r = RecoveryResult::compare(support, &model);
            Ok(Outcome {
                algorithm: name,
                time,
                eval_error: 1.0 - r.overlap as f64 / p.k as f64,
                success: r.exact,
            })
        })
        .collect()
}

fn banditron_trial(
    p: &BanditronParams,
    horizon: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<Outcome>> {
    let mut data_rng = rng_for(seed, "data");
    let stream = Stream::with_margin(&p.stream(horizon), &mut data_rng)?;
    let examples = banditron::generate(&stream, horizon, &mut data_rng);
    let chance = p.noise * (1.0 - 1.0 / p.k as f64);
    p.algorithms
        .iter()
        .map(|alg| {
            let (curve, time, name) = match alg {
                BanditronAlgorithm::Banditron | BanditronAlgorithm::Perceptron => {
                    let (algorithm, name) = if *alg == BanditronAlgorithm::Banditron {
                        (
                            OnlineAlgorithm::Banditron {
                                gamma_explore: p.gamma_explore,
                            },
                            "banditron",
                        )
                    } else {
                        (OnlineAlgorithm::Perceptron, "perceptron")
                    };
                    let mut rng = rng_for(seed, name);
                    let (c, t) = timed(|| {
                        Ok(banditron::run_examples(
                            algorithm, &examples, p.k, p.d, &mut rng,
                        ))
                    })?;
                    (c, t, name)
                }
                BanditronAlgorithm::Halving => {
                    // Halving needs a target inside its grid, so it gets its own
                    // stream labelled by a random grid member.
                    let grid = banditron::sign_grid(p.k, p.d)?;
                    let mut rng = rng_for(seed, "halving");
                    let target = grid[rng.random_range(0..grid.len())].clone();
                    let grid_stream = Stream::from_target(target, 0.0)?;
                    let ex = banditron::generate(&grid_stream, horizon, &mut rng);
                    let ((c, _), t) = timed(|| banditron::run_halving_examples(grid, &ex))?;
                    (c, t, "halving")
                }
            };
            let err = curve.error_rate();
            Ok(Outcome {
                algorithm: name,
                time,
                eval_error: err,
                success: err - chance <= eps,
            })
        })
        .collect()
}

pub fn write_points<W: Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points<R: Read>(input: R) -> Result<Vec<CurvePoint>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse(format!(
            "unexpected header: {}",
            header.join(",")
        )));
    }
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Probability that `m` random bits all agree with `<x, r_i>` for fresh
/// random `r_i` and a fixed hidden `x`. Each trial redraws the `r_i` and bits.
pub fn gl_probe<R: Rng + ?Sized>(n: usize, m: usize, trials: u64, rng: &mut R) -> Result<Estimate> {
    gl_probe_with(n, m, trials, rng.random(), Execution::Parallel)
}

/// Trials per independently seeded chunk; results do not depend on `exec`.
const GL_CHUNK: u64 = 4096;

pub fn gl_probe_with(
    n: usize,
    m: usize,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Estimate> {
    if m > MAX_GL_M {
        return Err(Error::TooLarge {
            what: "guessed bits",
            value: m,
            max: MAX_GL_M,
        });
    }
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and trials >= 1".into()));
    }
    let x = BitVec::random(
        n,
        &mut ChaCha8Rng::seed_from_u64(stream_seed(seed, "hidden")),
    );
    let chunks = trials.div_ceil(GL_CHUNK);
    let hits = par::sum_indexed(exec, chunks as usize, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &format!("chunk{c}")));
        let here = GL_CHUNK.min(trials - c as u64 * GL_CHUNK);
        (0..here)
            .filter(|_| {
                (0..m).all(|_| {
                    let r = BitVec::random(n, &mut rng);
                    let b: bool = rng.random();
                    b == x.dot_unchecked(&r)
                })
            })
            .count() as u64
    });
    Ok(Estimate::from_counts(hits, trials))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: String,
    pub algorithm: String,
    pub m: usize,
    pub trials: usize,
    pub median_train_time_ns: f64,
    pub mean_eval_error: f64,
    pub success_rate: f64,
}

/// One row per `(algorithm, m)`, sorted by algorithm then `m`.
pub fn summarize(points: &[CurvePoint]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&CurvePoint>> = BTreeMap::new();
    for p in points {
        groups
            .entry((p.algorithm.clone(), p.m))
            .or_default()
            .push(p);
    }
    groups
        .into_iter()
        .map(|((algorithm, m), ps)| {
            let times: Vec<f64> = ps.iter().map(|p| p.train_time_ns as f64).collect();
            let errors: Vec<f64> = ps.iter().map(|p| p.eval_error).collect();
            let successes = ps.iter().filter(|p| p.success).count();
            SummaryRow {
                family: ps[0].family.clone(),
                algorithm,
                m,
                trials: ps.len(),
                median_train_time_ns: stats::median(&times),
                mean_eval_error: stats::mean(&errors),
                success_rate: successes as f64 / ps.len() as f64,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn human_time(ns: f64) -> String {
    match ns {
        t if t >= 1e9 => format!("{:.2} s", t / 1e9),
        t if t >= 1e6 => format!("{:.2} ms", t / 1e6),
        t if t >= 1e3 => format!("{:.2} us", t / 1e3),
        t => format!("{t:.0} ns"),
    }
}

/// Aligned text table of a summary.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let header = [
        "family",
        "algorithm",
        "samples",
        "trials",
        "median time",
        "mean error",
        "success",
    ];
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.family.clone(),
                r.algorithm.clone(),
                r.m.to_string(),
                r.trials.to_string(),
                human_time(r.median_train_time_ns),
                format!("{:.4}", r.mean_eval_error),
                format!("{:.2}", r.success_rate),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header.map(String::from));
    line(&widths.map(|w| "-".repeat(w)));
    for row in &body {
        line(row);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick identity checks, each with a fixed seed.
pub fn selftest() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name, passed, detail: String| {
        out.push(CheckResult {
            name,
            passed,
            detail,
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gl = gl_probe(16, 3, 100_000, &mut rng);
    match gl {
        Ok(e) => push(
            "guess probability 2^-m",
            e.within_sigmas_of(0.125, 3.0),
            format!("{:.5} vs 0.125", e.mean),
        ),
        Err(e) => push("guess probability 2^-m", false, e.to_string()),
    }

    let anchors = [(0.0, 1.0), (1.0, 2.0), (-1.0, 2.0 / 3.0)];
    let ok = anchors
        .iter()
        .all(|&(k, v)| kernel::transform_value(k).is_ok_and(|t| t == v));
    push("kernel transform anchors", ok, "2/(2-k) at 0, 1, -1".into());

    let check = (|| -> Result<(bool, String)> {
        let perm: Arc<dyn PermutationOracle> =
            Arc::new(crate::owp::FeistelPermutation::new(12, 4, 3)?);
        let mut worst: f64 = 0.0;
        for i in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i);
            let x = BitVec::random(12, &mut rng);
            let mix = vec![
                (
                    x.clone(),
                    0.5 + 0.1 * i as f64,
                    crypto::RDistribution::Uniform,
                ),
                (
                    BitVec::random(12, &mut rng),
                    0.5,
                    crypto::RDistribution::Uniform,
                ),
            ];
            let dist = CryptoDistribution::mixture(mix, perm.clone())?;
            let h = crypto::HypothesisHx::new(x, perm.as_ref())?;
            let est = crypto::empirical_error(&h, &dist, 20_000, &mut rng)?;
            let exact = crypto::expected_error(&h, &dist);
            worst = worst.max((est.mean - exact).abs() / stats::binomial_sigma(exact, est.trials));
        }
        Ok((worst <= 4.0, format!("worst deviation {worst:.2} sigma")))
    })();
    match check {
        Ok((ok, d)) => push("hypothesis error closed form", ok, d),
        Err(e) => push("hypothesis error closed form", false, e.to_string()),
    }

    let check = (|| -> Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let te = TripleExpansion::new(4);
        for _ in 0..10 {
            let f = ThreeDnf::random(4, 1, 3, &mut rng);
            let c = dnf::dnf_to_conjunction(&f, &te)?;
            for v in 0..16u64 {
                let x = BitVec::from_u64(v, 4);
                if c.eval(&te.expand(&x)?)? != f.eval(&x)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })();
    push(
        "3-DNF to conjunction",
        check.unwrap_or(false),
        "10 formulas, d = 4".into(),
    );

    let check = (|| -> Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = SpikedModel::random(12, 2, &mut rng)?;
        Ok(sparse_pca::threshold_covariance(&model.covariance(), 2) == model.support())
    })();
    push(
        "spiked covariance diagonal",
        check.unwrap_or(false),
        "exact covariance, d = 12".into(),
    );

    out
}
