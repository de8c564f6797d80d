//! Online multiclass prediction with bandit feedback.
//!
//! After predicting, the learner is told only whether its label was right. The
//! [`FeedbackChannel`] holds the true label privately and answers a single
//! yes/no query, so code handed a channel cannot read the label:
//!
//! ```compile_fail
//! # use tradeoff::banditron::FeedbackChannel;
//! fn peek(c: &FeedbackChannel) -> usize { c.label }
//! ```

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_GRID_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMulticlass {
    pub w: DMatrix<f64>,
}

impl LinearMulticlass {
    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            w: DMatrix::zeros(k, d),
        }
    }

    pub fn k(&self) -> usize {
        self.w.nrows()
    }

    pub fn d(&self) -> usize {
        self.w.ncols()
    }

    pub fn scores(&self, x: &[f64]) -> DVector<f64> {
        &self.w * DVector::from_column_slice(x)
    }

    /// Highest-scoring label, ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(self.scores(x).as_slice())
    }

    fn add_row(&mut self, r: usize, x: &[f64], scale: f64) {
        for (c, &v) in x.iter().enumerate() {
            self.w[(r, c)] += scale * v;
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Answers "is `label` correct?" for the current round.
pub struct FeedbackChannel {
    label: usize,
}

impl FeedbackChannel {
    pub fn new(label: usize) -> Self {
        Self { label }
    }

    pub fn query(&self, label: usize) -> bool {
        label == self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BanditRound {
    /// Label output to the environment.
    pub predicted: usize,
    /// Output differed from the greedy label.
    pub explored: bool,
    pub correct: bool,
    pub updated: bool,
}

/// Label distribution `(1 - gamma) delta_greedy + gamma uniform[k]`.
pub fn exploration_probability(k: usize, greedy: usize, gamma: f64, label: usize) -> f64 {
    gamma / k as f64 + if label == greedy { 1.0 - gamma } else { 0.0 }
}

/// One Banditron round. The row update is
/// `x (1[correct and sampled = r] / P(sampled = r) - 1[r = greedy])`.
pub fn banditron_step(
    state: &mut LinearMulticlass,
    x: &[f64],
    channel: &FeedbackChannel,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> BanditRound {
    let k = state.k();
    let greedy = state.predict(x);
    let sampled = if rng.random::<f64>() < gamma {
        rng.random_range(0..k)
    } else {
        greedy
    };
    let correct = channel.query(sampled);
    if correct {
        state.add_row(
            sampled,
            x,
            1.0 / exploration_probability(k, greedy, gamma, sampled),
        );
    }
    state.add_row(greedy, x, -1.0);
    BanditRound {
        predicted: sampled,
        explored: sampled != greedy,
        correct,
        updated: true,
    }
}

/// Full-information multiclass Perceptron: on a mistake, `+x` at the true row
/// and `-x` at the predicted row.
pub fn perceptron_step(state: &mut LinearMulticlass, x: &[f64], label: usize) -> BanditRound {
    let predicted = state.predict(x);
    let correct = predicted == label;
    if !correct {
        state.add_row(label, x, 1.0);
        state.add_row(predicted, x, -1.0);
    }
    BanditRound {
        predicted,
        explored: false,
        correct,
        updated: !correct,
    }
}

/// Every `k x d` sign matrix scaled by `1 / sqrt(kd)`, in binary counting order
/// (bit `r*d + c` set means entry `(r, c)` is negative).
pub fn sign_grid(k: usize, d: usize) -> Result<Vec<LinearMulticlass>> {
    let bits = k * d;
    if bits > MAX_GRID_BITS {
        return Err(Error::TooLarge {
            what: "sign grid bits",
            value: bits,
            max: MAX_GRID_BITS,
        });
    }
    let scale = 1.0 / (bits as f64).sqrt();
    Ok((0..1usize << bits)
        .map(|idx| LinearMulticlass {
            w: DMatrix::from_fn(k, d, |r, c| {
                if idx >> (r * d + c) & 1 == 1 {
                    -scale
                } else {
                    scale
                }
            }),
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct Halving {
    survivors: Vec<LinearMulticlass>,
    k: usize,
    round: usize,
}

impl Halving {
    pub fn new(version_space: Vec<LinearMulticlass>) -> Result<Self> {
        let k = version_space
            .first()
            .ok_or(Error::EmptyVersionSpace { round: 0 })?
            .k();
        Ok(Self {
            survivors: version_space,
            k,
            round: 0,
        })
    }

    pub fn survivors(&self) -> &[LinearMulticlass] {
        &self.survivors
    }

    /// Predicts the plurality label of the survivors (ties to the lowest) and
    /// prunes on the feedback bit.
    pub fn step(&mut self, x: &[f64], channel: &FeedbackChannel) -> Result<BanditRound> {
        self.round += 1;
        let preds: Vec<usize> = self.survivors.iter().map(|h| h.predict(x)).collect();
        let mut votes = vec![0usize; self.k];
        for &p in &preds {
            votes[p] += 1;
        }
        let predicted = (0..self.k).fold(0, |b, l| if votes[l] > votes[b] { l } else { b });
        let correct = channel.query(predicted);
        let before = self.survivors.len();
        let mut keep = preds.iter().map(|&p| (p == predicted) == correct);
        self.survivors.retain(|_| keep.next().unwrap_or(false));
        if self.survivors.is_empty() {
            return Err(Error::EmptyVersionSpace { round: self.round });
        }
        Ok(BanditRound {
            predicted,
            explored: false,
            correct,
            updated: self.survivors.len() < before,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub k: usize,
    pub d: usize,
    pub margin: f64,
    pub horizon: usize,
    /// Probability that a round's label is replaced by a uniform one.
    #[serde(default)]
    pub noise: f64,
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k > self.d {
            return Err(Error::Config(format!(
                "need 2 <= k <= d, got k={}, d={}",
                self.k, self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config("noise rate must be in [0, 1]".into()));
        }
        // rows have norm 1/sqrt(k), so no unit x can beat that margin
        if !(self.margin > 0.0 && self.margin < 1.0 / (self.k as f64).sqrt()) {
            return Err(Error::Config(format!(
                "margin must be in (0, 1/sqrt(k)) = (0, {:.4})",
                1.0 / (self.k as f64).sqrt()
            )));
        }
        Ok(())
    }
}

fn unit_gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

#[derive(Debug, Clone)]
enum Generator {
    /// Orthonormal directions `u_r`; the target rows are `u_r / sqrt(k)`.
    Margin {
        dirs: Vec<DVector<f64>>,
        margin: f64,
    },
    /// Uniform `x` on the sphere, labelled by the target.
    Sphere,
}

/// Labelled example source. With zero noise every example is labelled by
/// [`Stream::target`].
#[derive(Debug, Clone)]
pub struct Stream {
    target: LinearMulticlass,
    noise: f64,
    generator: Generator,
}

impl Stream {
    /// Target with orthogonal rows of norm `1/sqrt(k)` (so `||W||_F = 1`), and
    /// `x` uniform on the unit sphere conditioned on the correct score beating
    /// the runner-up by at least `margin`.
    pub fn with_margin<R: Rng + ?Sized>(cfg: &StreamConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(cfg.k);
        while dirs.len() < cfg.k {
            let mut v = unit_gaussian(cfg.d, rng);
            for u in &dirs {
                v -= u * u.dot(&v);
            }
            let n = v.norm();
            if n > 1e-6 {
                dirs.push(v / n);
            }
        }
        let scale = 1.0 / (cfg.k as f64).sqrt();
        let target = LinearMulticlass {
            w: DMatrix::from_fn(cfg.k, cfg.d, |r, c| dirs[r][c] * scale),
        };
        Ok(Self {
            target,
            noise: cfg.noise,
            generator: Generator::Margin {
                dirs,
                margin: cfg.margin,
            },
        })
    }

    pub fn from_target(target: LinearMulticlass, noise: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::Config("noise rate must be in [0, 1]".into()));
        }
        Ok(Self {
            target,
            noise,
            generator: Generator::Sphere,
        })
    }

    pub fn target(&self) -> &LinearMulticlass {
        &self.target
    }

    pub fn next_example<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, usize) {
        let k = self.target.k();
        let d = self.target.d();
        let (x, clean) = match &self.generator {
            Generator::Sphere => {
                let x: Vec<f64> = unit_gaussian(d, rng).iter().copied().collect();
                let y = self.target.predict(&x);
                (x, y)
            }
            Generator::Margin { dirs, margin } => {
                // Only the coordinates c_r = <x, u_r> affect the margin. For x
                // uniform on the sphere they are g_r / sqrt(|g|^2 + chi2(d - k))
                // with g standard normal in R^k, so the rejection step runs on
                // k + 1 numbers and the orthogonal part is filled in after.
                let chi = ChiSquared::new((d - k) as f64).expect("d > k");
                let need = margin * (k as f64).sqrt();
                let c = loop {
                    let g: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                    let rest = if d > k { rng.sample(chi) } else { 0.0 };
                    let norm = (g.iter().map(|v| v * v).sum::<f64>() + rest).sqrt();
                    let c: Vec<f64> = g.iter().map(|v| v / norm).collect();
                    let y = argmax(&c);
                    let runner_up = (0..k)
                        .filter(|&r| r != y)
                        .map(|r| c[r])
                        .fold(f64::NEG_INFINITY, f64::max);
                    if c[y] - runner_up >= need {
                        break c;
                    }
                };
                let mut x = DVector::zeros(d);
                for (u, &cr) in dirs.iter().zip(&c) {
                    x += u * cr;
                }
                let resid = (1.0 - c.iter().map(|v| v * v).sum::<f64>()).max(0.0).sqrt();
                if resid > 0.0 {
                    let v = loop {
                        let mut v = unit_gaussian(d, rng);
                        for u in dirs {
                            v -= u * u.dot(&v);
                        }
                        let n = v.norm();
                        if n > 1e-6 {
                            break v / n;
                        }
                    };
                    x += v * resid;
                }
                (x.iter().copied().collect(), argmax(&c))
            }
        };
        let y = if self.noise > 0.0 && rng.random::<f64>() < self.noise {
            rng.random_range(0..k)
        } else {
            clean
        };
        (x, y)
    }
}

/// Difference between the best and second-best score.
pub fn score_margin(target: &LinearMulticlass, x: &[f64], label: usize) -> f64 {
    let s = target.scores(x);
    let runner_up = (0..s.len())
        .filter(|&r| r != label)
        .map(|r| s[r])
        .fold(f64::NEG_INFINITY, f64::max);
    s[label] - runner_up
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OnlineAlgorithm {
    /// `gamma_explore` defaults to `sqrt(k / T)`.
    Banditron {
        gamma_explore: Option<f64>,
    },
    Perceptron,
}

pub fn default_gamma(k: usize, horizon: usize) -> f64 {
    (k as f64 / horizon.max(1) as f64).sqrt().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MistakeCurve {
    pub cumulative: Vec<u64>,
    pub explored: Vec<bool>,
}

impl MistakeCurve {
    fn push(&mut self, round: BanditRound) {
        let prev = self.cumulative.last().copied().unwrap_or(0);
        self.cumulative.push(prev + u64::from(!round.correct));
        self.explored.push(round.explored);
    }

    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn rounds(&self) -> usize {
        self.cumulative.len()
    }

    pub fn error_rate(&self) -> f64 {
        if self.rounds() == 0 {
            0.0
        } else {
            self.total() as f64 / self.rounds() as f64
        }
    }

    /// Mistakes per round over the `q`-th quarter (0-based).
    pub fn quartile_slope(&self, q: usize) -> f64 {
        let n = self.rounds();
        let (lo, hi) = (n * q / 4, n * (q + 1) / 4);
        if hi <= lo {
            return 0.0;
        }
        let start = if lo == 0 { 0 } else { self.cumulative[lo - 1] };
        (self.cumulative[hi - 1] - start) as f64 / (hi - lo) as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "cumulative_mistakes", "explored"])?;
        for (i, (c, e)) in self.cumulative.iter().zip(&self.explored).enumerate() {
            w.write_record([(i + 1).to_string(), c.to_string(), u8::from(*e).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `horizon` examples from `stream`.
pub fn generate<R: Rng + ?Sized>(
    stream: &Stream,
    horizon: usize,
    rng: &mut R,
) -> Vec<(Vec<f64>, usize)> {
    (0..horizon).map(|_| stream.next_example(rng)).collect()
}

/// Runs `algorithm` from zero weights over pre-drawn examples.
pub fn run_examples<R: Rng + ?Sized>(
    algorithm: OnlineAlgorithm,
    examples: &[(Vec<f64>, usize)],
    k: usize,
    d: usize,
    rng: &mut R,
) -> MistakeCurve {
    let mut state = LinearMulticlass::zeros(k, d);
    let mut curve = MistakeCurve::default();
    let gamma = match algorithm {
        OnlineAlgorithm::Banditron { gamma_explore } => {
            gamma_explore.unwrap_or_else(|| default_gamma(k, examples.len()))
        }
        OnlineAlgorithm::Perceptron => 0.0,
    };
    let mut rng = rng;
    for (x, y) in examples {
        let round = match algorithm {
            OnlineAlgorithm::Banditron { .. } => {
                banditron_step(&mut state, x, &FeedbackChannel::new(*y), gamma, &mut rng)
            }
            OnlineAlgorithm::Perceptron => perceptron_step(&mut state, x, *y),
        };
        curve.push(round);
    }
    curve
}

pub fn run_stream<R: Rng + ?Sized>(
    algorithm: OnlineAlgorithm,
    stream: &Stream,
    horizon: usize,
    rng: &mut R,
) -> MistakeCurve {
    let examples = generate(stream, horizon, rng);
    let target = stream.target();
    run_examples(algorithm, &examples, target.k(), target.d(), rng)
}

/// Runs Halving over `version_space` on pre-drawn examples.
pub fn run_halving_examples(
    version_space: Vec<LinearMulticlass>,
    examples: &[(Vec<f64>, usize)],
) -> Result<(MistakeCurve, Halving)> {
    let mut halving = Halving::new(version_space)?;
    let mut curve = MistakeCurve::default();
    for (x, y) in examples {
        curve.push(halving.step(x, &FeedbackChannel::new(*y))?);
    }
    Ok((curve, halving))
}

pub fn run_halving<R: Rng + ?Sized>(
    version_space: Vec<LinearMulticlass>,
    stream: &Stream,
    horizon: usize,
    rng: &mut R,
) -> Result<(MistakeCurve, Halving)> {
    run_halving_examples(version_space, &generate(stream, horizon, rng))
}
