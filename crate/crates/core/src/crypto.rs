//! The inner-product learning problem built on a permutation `P`.
//!
//! Instances are pairs `(r, s)` of `n`-bit strings and the label is
//! `b = <P^{-1}(s), r>` over GF(2). Hypotheses `h_x` answer `<x, r>` when
//! `s = P(x)` and a fair coin otherwise.
//!
//! Every distribution here is specified by preimages rather than by `s`
//! values: a component with preimage `x` emits `s = P(x)` and labels
//! `b = <x, r>`, so every generated example is a member of the domain by
//! construction and no inversion is needed to generate data.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gf2::{BitVec, Gf2Basis};
use crate::owp::PermutationOracle;
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CryptoExample {
    pub r: BitVec,
    pub s: BitVec,
    pub b: bool,
}

/// A rule mapping `(r, s)` to a bit, possibly using fresh randomness.
pub trait CryptoPredictor: Sync {
    fn predict(&self, r: &BitVec, s: &BitVec, rng: &mut dyn RngCore) -> Result<bool>;

    /// Exact expected 0-1 loss under `dist`, when the predictor can compute it.
    fn expected_error(&self, _dist: &CryptoDistribution) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisHx {
    x: BitVec,
    px: BitVec,
}

impl HypothesisHx {
    pub fn new(x: BitVec, p: &dyn PermutationOracle) -> Result<Self> {
        let px = p.forward(&x)?;
        Ok(Self { x, px })
    }

    pub fn x(&self) -> &BitVec {
        &self.x
    }

    /// Cached `P(x)`.
    pub fn px(&self) -> &BitVec {
        &self.px
    }
}

/// `h_x(r, s)`: `<x, r>` when `s = P(x)`, otherwise a fresh uniform bit.
pub fn eval_hypothesis(
    h: &HypothesisHx,
    r: &BitVec,
    s: &BitVec,
    rng: &mut dyn RngCore,
) -> Result<bool> {
    check_len(h.x.len(), r.len())?;
    check_len(h.x.len(), s.len())?;
    if *s == h.px {
        Ok(h.x.dot_unchecked(r))
    } else {
        Ok(rng.random())
    }
}

impl CryptoPredictor for HypothesisHx {
    fn predict(&self, r: &BitVec, s: &BitVec, rng: &mut dyn RngCore) -> Result<bool> {
        eval_hypothesis(self, r, s, rng)
    }

    fn expected_error(&self, dist: &CryptoDistribution) -> Option<f64> {
        Some(expected_error(self, dist))
    }
}

/// How `r` is drawn within one mixture component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RDistribution {
    Uniform,
    /// Uniform over `offset + span(directions)`.
    Affine {
        offset: BitVec,
        directions: Gf2Basis,
    },
}

impl RDistribution {
    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> BitVec {
        match self {
            RDistribution::Uniform => BitVec::random(n, rng),
            RDistribution::Affine { offset, directions } => {
                let mut r = directions.random_member(rng);
                r.xor_unchecked(offset);
                r
            }
        }
    }

    /// `Pr(r in span(basis))` for `r` drawn from this distribution.
    pub fn span_probability(&self, basis: &Gf2Basis) -> f64 {
        let n = basis.dim();
        match self {
            RDistribution::Uniform => 2f64.powi(basis.rank() as i32 - n as i32),
            RDistribution::Affine { offset, directions } => {
                // offset + V meets B iff offset in B + V; the intersection is
                // then a coset of V ∩ B, with dim(V ∩ B) = dim V + dim B - dim(V + B).
                let mut sum = basis.clone();
                for row in directions.rows() {
                    sum.insert(row).expect("same dimension");
                }
                if !sum.contains(offset).expect("same dimension") {
                    return 0.0;
                }
                let meet = directions.rank() + basis.rank() - sum.rank();
                2f64.powi(meet as i32 - directions.rank() as i32)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Component {
    pub preimage: BitVec,
    pub s: BitVec,
    pub weight: f64,
    pub r_dist: RDistribution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistributionKind {
    HardDx,
    MixtureOverS,
}

#[derive(Clone)]
pub struct CryptoDistribution {
    n: usize,
    kind: DistributionKind,
    components: Vec<Component>,
    cumulative: Vec<f64>,
    permutation: Arc<dyn PermutationOracle>,
}

impl std::fmt::Debug for CryptoDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CryptoDistribution")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .field("components", &self.components)
            .field("permutation", &self.permutation.id())
            .finish()
    }
}

impl CryptoDistribution {
    /// `D_x`: uniform `r`, `s = P(x)`, `b = <x, r>`.
    pub fn hard(x: BitVec, permutation: Arc<dyn PermutationOracle>) -> Result<Self> {
        let mut d = Self::mixture(vec![(x, 1.0, RDistribution::Uniform)], permutation)?;
        d.kind = DistributionKind::HardDx;
        Ok(d)
    }

    /// Mixture of components `(preimage, weight, r-distribution)`. Weights are
    /// normalized to sum to one.
    pub fn mixture(
        components: Vec<(BitVec, f64, RDistribution)>,
        permutation: Arc<dyn PermutationOracle>,
    ) -> Result<Self> {
        let n = permutation.n();
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs a component".into()));
        }
        let total: f64 = components.iter().map(|c| c.1).sum();
        if total.is_nan() || total <= 0.0 || components.iter().any(|c| c.1.is_nan() || c.1 < 0.0) {
            return Err(Error::InvalidArgument(
                "mixture weights must be non-negative with positive sum".into(),
            ));
        }
        let mut built = Vec::with_capacity(components.len());
        for (preimage, weight, r_dist) in components {
            check_len(n, preimage.len())?;
            if let RDistribution::Affine { offset, directions } = &r_dist {
                check_len(n, offset.len())?;
                check_len(n, directions.dim())?;
            }
            let s = permutation.forward(&preimage)?;
            built.push(Component {
                preimage,
                s,
                weight: weight / total,
                r_dist,
            });
        }
        let cumulative = built
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.weight;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            n,
            kind: DistributionKind::MixtureOverS,
            components: built,
            cumulative,
            permutation,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn permutation(&self) -> &Arc<dyn PermutationOracle> {
        &self.permutation
    }

    /// Exact `Pr(s = target)`.
    pub fn prob_s(&self, target: &BitVec) -> f64 {
        self.components
            .iter()
            .filter(|c| c.s == *target)
            .map(|c| c.weight)
            .sum()
    }

    /// Best achievable expected error over the class: `(1 - max_s Pr(s)) / 2`,
    /// attained by `h_x` with `P(x)` the most likely `s`.
    pub fn best_in_class_error(&self) -> f64 {
        let best = self
            .components
            .iter()
            .map(|c| self.prob_s(&c.s))
            .fold(0.0, f64::max);
        (1.0 - best) / 2.0
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &Component {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.components[i.min(self.components.len() - 1)]
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> CryptoExample {
        let c = self.pick(rng);
        let r = c.r_dist.sample(self.n, rng);
        let b = c.preimage.dot_unchecked(&r);
        CryptoExample {
            r,
            s: c.s.clone(),
            b,
        }
    }
}

/// `m` i.i.d. draws.
pub fn sample<R: Rng + ?Sized>(
    dist: &CryptoDistribution,
    m: usize,
    rng: &mut R,
) -> Vec<CryptoExample> {
    (0..m).map(|_| dist.sample_one(rng)).collect()
}

/// Closed-form expected 0-1 loss of `h_x`: `(1 - Pr(s = P(x))) / 2`.
pub fn expected_error(h: &HypothesisHx, dist: &CryptoDistribution) -> f64 {
    (1.0 - dist.prob_s(&h.px)) / 2.0
}

/// Monte-Carlo 0-1 loss on `trials` fresh draws.
pub fn empirical_error<R: Rng>(
    pred: &dyn CryptoPredictor,
    dist: &CryptoDistribution,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut errors = 0;
    for _ in 0..trials {
        let ex = dist.sample_one(rng);
        if pred.predict(&ex.r, &ex.s, rng)? != ex.b {
            errors += 1;
        }
    }
    Ok(Estimate::from_counts(errors, trials))
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    r: String,
    s: String,
    b: u8,
}

/// Writes `r,s,b` rows with a header.
pub fn write_dataset<W: Write>(out: W, data: &[CryptoExample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for ex in data {
        w.serialize(CsvRow {
            r: ex.r.to_string(),
            s: ex.s.to_string(),
            b: ex.b as u8,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<CryptoExample>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["r", "s", "b"] {
        return Err(Error::Parse(format!(
            "expected header r,s,b, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    let mut n = None;
    for row in rd.deserialize() {
        let row: CsvRow = row?;
        let r: BitVec = row.r.parse()?;
        let s: BitVec = row.s.parse()?;
        let expected = *n.get_or_insert(r.len());
        check_len(expected, r.len())?;
        check_len(expected, s.len())?;
        let b = match row.b {
            0 => false,
            1 => true,
            v => return Err(Error::Parse(format!("label must be 0 or 1, got {v}"))),
        };
        out.push(CryptoExample { r, s, b });
    }
    Ok(out)
}
