//! Learners for the inner-product problem.
//!
//! Both start from the most common `s'` in the sample. The exhaustive learner
//! inverts `P` at `s'` by brute force and returns `h_{x'}`. The improper
//! learner never inverts: it stores the `r`s seen with `s'` in a tagged GF(2)
//! basis whose tags are the observed labels, and answers `<x', r>` for any `r`
//! in their span by XORing the tags selected by the span coefficients.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore};

use crate::crypto::{CryptoDistribution, CryptoExample, CryptoPredictor, HypothesisHx};
use crate::error::{check_len, Error, Result};
use crate::gf2::{BitVec, Gf2Basis};
use crate::owp::{invert_bruteforce_with, BruteForce, PermutationOracle};
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainReport {
    pub m: usize,
    /// Number of examples whose `s` equals the chosen `s'`.
    pub matching: usize,
    pub s_prime: BitVec,
    pub train_time: Duration,
    pub tie_broken: bool,
}

/// Most frequent `s`, ties going to the lexicographically smallest string.
/// Returns `(s', count, tie_broken)`.
pub fn most_common_s(data: &[CryptoExample]) -> Result<(BitVec, usize, bool)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut counts: HashMap<&BitVec, usize> = HashMap::new();
    for ex in data {
        *counts.entry(&ex.s).or_default() += 1;
    }
    let top = counts.values().copied().max().expect("non-empty");
    let mut tied = counts
        .into_iter()
        .filter(|&(_, c)| c == top)
        .map(|(s, _)| s);
    let first = tied.next().expect("max exists");
    let mut ties = 0;
    let best = tied.fold(first, |best, s| {
        ties += 1;
        best.min(s)
    });
    Ok((best.clone(), top, ties > 0))
}

/// Exhaustive-inversion learner: `h_{x'}` with `x' = P^{-1}(s')`.
pub fn train_inefficient(
    data: &[CryptoExample],
    p: &dyn PermutationOracle,
    brute_force: BruteForce,
) -> Result<(HypothesisHx, TrainReport)> {
    let start = Instant::now();
    let (s_prime, matching, tie_broken) = most_common_s(data)?;
    let x = invert_bruteforce_with(p, &s_prime, brute_force)?;
    let h = HypothesisHx::new(x, p)?;
    let report = TrainReport {
        m: data.len(),
        matching,
        s_prime,
        train_time: start.elapsed(),
        tie_broken,
    };
    Ok((h, report))
}

/// Improper learner: no inversion anywhere.
pub fn train_efficient(data: &[CryptoExample]) -> Result<(ImproperPredictor, TrainReport)> {
    let start = Instant::now();
    let (s_prime, matching, tie_broken) = most_common_s(data)?;
    let n = s_prime.len();
    let mut basis = Gf2Basis::new(n);
    for ex in data.iter().filter(|ex| ex.s == s_prime) {
        check_len(n, ex.r.len())?;
        if basis.rank() == n {
            break;
        }
        basis.insert_tagged(&ex.r, ex.b)?;
    }
    let report = TrainReport {
        m: data.len(),
        matching,
        s_prime: s_prime.clone(),
        train_time: start.elapsed(),
        tie_broken,
    };
    Ok((ImproperPredictor { s_prime, basis }, report))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImproperPredictor {
    s_prime: BitVec,
    basis: Gf2Basis,
}

/// Which branch of the improper predictor handles an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictCase {
    Spanned,
    OtherS,
    Unspanned,
}

const MAGIC: &[u8; 4] = b"IMPR";
const FORMAT_VERSION: u16 = 1;

impl ImproperPredictor {
    pub fn s_prime(&self) -> &BitVec {
        &self.s_prime
    }

    pub fn basis(&self) -> &Gf2Basis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.s_prime.len()
    }

    pub fn case(&self, r: &BitVec, s: &BitVec) -> Result<PredictCase> {
        check_len(self.n(), r.len())?;
        check_len(self.n(), s.len())?;
        Ok(if *s != self.s_prime {
            PredictCase::OtherS
        } else if self.basis.contains(r)? {
            PredictCase::Spanned
        } else {
            PredictCase::Unspanned
        })
    }

    /// The deterministic output, present only on spanned inputs with `s = s'`.
    pub fn deterministic_output(&self, r: &BitVec, s: &BitVec) -> Result<Option<bool>> {
        check_len(self.n(), r.len())?;
        check_len(self.n(), s.len())?;
        if *s != self.s_prime {
            return Ok(None);
        }
        self.basis.span_tag(r)
    }

    /// Three-case prediction; both random branches draw a fresh fair bit.
    pub fn predict(&self, r: &BitVec, s: &BitVec, rng: &mut dyn RngCore) -> Result<bool> {
        Ok(match self.deterministic_output(r, s)? {
            Some(b) => b,
            None => rng.random(),
        })
    }

    /// Exact `Pr(s = s', r not spanned)` under `dist`.
    pub fn case3_probability(&self, dist: &CryptoDistribution) -> f64 {
        dist.components()
            .iter()
            .filter(|c| c.s == self.s_prime)
            .map(|c| c.weight * (1.0 - c.r_dist.span_probability(&self.basis)))
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.s_prime.to_bytes());
        out.extend_from_slice(&(self.basis.rank() as u32).to_le_bytes());
        for row in self.basis.rows() {
            out.extend_from_slice(&row.to_bytes());
        }
        out.extend_from_slice(&BitVec::from_bools(self.basis.tags().iter().copied()).to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.get(..4) != Some(MAGIC.as_slice()) {
            return Err(Error::Parse("not an improper-predictor file".into()));
        }
        let version = bytes
            .get(4..6)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .ok_or_else(|| Error::Parse("truncated header".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported predictor version {version}"
            )));
        }
        let mut at = 6;
        let (s_prime, used) = BitVec::from_bytes(&bytes[at..])?;
        at += used;
        let rank = bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
            .ok_or_else(|| Error::Parse("truncated rank".into()))?;
        at += 4;
        if rank > s_prime.len() {
            return Err(Error::Parse(format!(
                "rank {rank} exceeds dimension {}",
                s_prime.len()
            )));
        }
        let mut rows = Vec::with_capacity(rank);
        for _ in 0..rank {
            let (row, used) = BitVec::from_bytes(&bytes[at..])?;
            at += used;
            rows.push(row);
        }
        let (tags, used) = BitVec::from_bytes(&bytes[at..])?;
        at += used;
        if tags.len() != rank || at != bytes.len() {
            return Err(Error::Parse("label block does not match basis".into()));
        }
        let mut basis = Gf2Basis::new(s_prime.len());
        for (row, tag) in rows.iter().zip(tags.iter()) {
            if !basis.insert_tagged(row, tag)? {
                return Err(Error::Parse("basis rows are linearly dependent".into()));
            }
        }
        if basis.rows() != rows.as_slice() {
            return Err(Error::Parse(
                "basis rows are not in reduced row-echelon form".into(),
            ));
        }
        Ok(Self { s_prime, basis })
    }
}

impl CryptoPredictor for ImproperPredictor {
    fn predict(&self, r: &BitVec, s: &BitVec, rng: &mut dyn RngCore) -> Result<bool> {
        ImproperPredictor::predict(self, r, s, rng)
    }

    /// Errors are only made by the two random branches, each at rate 1/2.
    fn expected_error(&self, dist: &CryptoDistribution) -> Option<f64> {
        Some(
            dist.components()
                .iter()
                .map(|c| {
                    let spanned = if c.s == self.s_prime {
                        c.r_dist.span_probability(&self.basis)
                    } else {
                        0.0
                    };
                    c.weight * (1.0 - spanned) / 2.0
                })
                .sum(),
        )
    }
}

/// Monte-Carlo estimate of `Pr(s = s', r not spanned)`.
pub fn case3_rate<R: Rng>(
    pred: &ImproperPredictor,
    dist: &CryptoDistribution,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut hits = 0;
    for _ in 0..trials {
        let ex = dist.sample_one(rng);
        if pred.case(&ex.r, &ex.s)? == PredictCase::Unspanned {
            hits += 1;
        }
    }
    Ok(Estimate::from_counts(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{expected_error, sample, RDistribution};
    use crate::owp::{FeistelPermutation, TablePermutation, Trapdoor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn ex(r: &str, s: &str, b: bool) -> CryptoExample {
        CryptoExample {
            r: r.parse().unwrap(),
            s: s.parse().unwrap(),
            b,
        }
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let data = vec![
            ex("00", "11", false),
            ex("00", "01", false),
            ex("00", "10", false),
        ];
        let (s, c, tie) = most_common_s(&data).unwrap();
        assert_eq!((s.to_string(), c, tie), ("01".to_string(), 1, true));
        let (s, _, tie) = most_common_s(&data[..1]).unwrap();
        assert_eq!((s.to_string(), tie), ("11".to_string(), false));
        assert!(matches!(most_common_s(&[]), Err(Error::EmptyData)));
    }

    #[test]
    fn inefficient_on_hard_distribution() {
        let p = Arc::new(FeistelPermutation::new(12, 4, 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = BitVec::random(12, &mut rng);
        let d = CryptoDistribution::hard(x.clone(), p.clone()).unwrap();
        let data = sample(&d, 20, &mut rng);
        let (h, rep) = train_inefficient(&data, p.as_ref(), BruteForce::default()).unwrap();
        assert_eq!(h.x(), &x);
        assert_eq!(rep.s_prime, p.forward(&x).unwrap());
        assert_eq!(expected_error(&h, &d), 0.0);
        assert_eq!((rep.m, rep.matching), (20, 20));
    }

    #[test]
    fn inefficient_refuses_above_cap() {
        let p = FeistelPermutation::new(12, 4, 3).unwrap();
        let data = vec![ex("000000000000", "000000000000", false)];
        let cfg = BruteForce {
            cap: 10,
            ..BruteForce::default()
        };
        assert!(matches!(
            train_inefficient(&data, &p, cfg),
            Err(Error::BruteForceCap { n: 12, cap: 10 })
        ));
    }

    #[test]
    fn basis_reproduction_and_linearity() {
        let p = Arc::new(TablePermutation::random(10, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = CryptoDistribution::hard(BitVec::random(10, &mut rng), p).unwrap();
        let data = sample(&d, 6, &mut rng);
        let (pred, _) = train_efficient(&data).unwrap();
        for e in &data {
            assert_eq!(pred.predict(&e.r, &e.s, &mut rng).unwrap(), e.b);
        }
        let mut r = data[0].r.clone();
        r.xor_assign(&data[1].r).unwrap();
        assert_eq!(
            pred.predict(&r, &data[0].s, &mut rng).unwrap(),
            data[0].b ^ data[1].b
        );
    }

    #[test]
    fn single_example_spans_one_line() {
        let data = vec![ex("0110", "1010", true)];
        let (pred, rep) = train_efficient(&data).unwrap();
        assert_eq!(rep.matching, 1);
        assert_eq!(pred.basis().rank(), 1);
        let s: BitVec = "1010".parse().unwrap();
        for v in 0..16u64 {
            let r = BitVec::from_u64(v, 4);
            let det = pred.deterministic_output(&r, &s).unwrap();
            match r.to_string().as_str() {
                "0000" => assert_eq!(det, Some(false)),
                "0110" => assert_eq!(det, Some(true)),
                _ => assert_eq!(det, None),
            }
        }
    }

    #[test]
    fn other_s_is_a_fair_coin() {
        let data = vec![ex("0110", "1010", true)];
        let (pred, _) = train_efficient(&data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: BitVec = "0110".parse().unwrap();
        let s: BitVec = "1011".parse().unwrap();
        let ones = (0..10_000)
            .filter(|_| pred.predict(&r, &s, &mut rng).unwrap())
            .count();
        assert!((ones as f64 / 1e4 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn case3_anchors() {
        let n = 10;
        let p = Arc::new(FeistelPermutation::new(n, 4, 5).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = BitVec::random(n, &mut rng);
        let d = CryptoDistribution::hard(x.clone(), p.clone()).unwrap();

        // full rank: never case 3
        let mut data = sample(&d, 400, &mut rng);
        let (full, _) = train_efficient(&data).unwrap();
        assert_eq!(full.basis().rank(), n);
        assert_eq!(case3_rate(&full, &d, 5000, &mut rng).unwrap().mean, 0.0);
        assert_eq!(full.case3_probability(&d), 0.0);

        // only the zero vector spanned
        for e in data.iter_mut() {
            e.r = BitVec::zeros(n);
            e.b = false;
        }
        let (empty, _) = train_efficient(&data).unwrap();
        assert_eq!(empty.basis().rank(), 0);
        let expect = 1.0 - 2f64.powi(-(n as i32));
        assert_eq!(empty.case3_probability(&d), expect);
        let est = case3_rate(&empty, &d, 20_000, &mut rng).unwrap();
        assert!(
            est.within_sigmas_of(expect, 3.0) || est.mean >= 0.995,
            "{est:?}"
        );
    }

    #[test]
    fn case3_bound_at_prescribed_sample_size() {
        let (n, eps) = (20usize, 0.1);
        let m = (16.0 * n as f64 / (eps * eps)) as usize;
        let p = Arc::new(FeistelPermutation::new(n, 4, 6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = BitVec::random(n, &mut rng);
        let d = CryptoDistribution::mixture(
            vec![
                (x, 0.3, RDistribution::Uniform),
                (BitVec::random(n, &mut rng), 0.25, RDistribution::Uniform),
                (BitVec::random(n, &mut rng), 0.45, RDistribution::Uniform),
            ],
            p,
        )
        .unwrap();
        let (pred, _) = train_efficient(&sample(&d, m, &mut rng)).unwrap();
        let est = case3_rate(&pred, &d, 20_000, &mut rng).unwrap();
        // analytic bound exp(-eps m / 8) + 2n / (eps m)
        let bound = (-eps * m as f64 / 8.0).exp() + 2.0 * n as f64 / (eps * m as f64);
        assert!(bound <= eps / 2.0);
        assert!(
            est.mean <= eps / 2.0 + 3.0 * est.std_err.max(1e-4),
            "{est:?}"
        );
    }

    #[test]
    fn expected_error_matches_monte_carlo() {
        let n = 8;
        let p = Arc::new(FeistelPermutation::new(n, 4, 7).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut dirs = Gf2Basis::new(n);
        for _ in 0..4 {
            dirs.insert(&BitVec::random(n, &mut rng)).unwrap();
        }
        let x = BitVec::random(n, &mut rng);
        let d = CryptoDistribution::mixture(
            vec![
                (
                    x,
                    0.7,
                    RDistribution::Affine {
                        offset: BitVec::random(n, &mut rng),
                        directions: dirs,
                    },
                ),
                (BitVec::random(n, &mut rng), 0.3, RDistribution::Uniform),
            ],
            p,
        )
        .unwrap();
        let (pred, _) = train_efficient(&sample(&d, 3, &mut rng)).unwrap();
        let exact = CryptoPredictor::expected_error(&pred, &d).unwrap();
        let est = crate::crypto::empirical_error(&pred, &d, 40_000, &mut rng).unwrap();
        assert!(est.within_sigmas_of(exact, 3.0), "{est:?} vs {exact}");
        let c3 = case3_rate(&pred, &d, 40_000, &mut rng).unwrap();
        assert!(c3.within_sigmas_of(pred.case3_probability(&d), 3.0));
    }

    #[test]
    fn labels_match_trapdoor_preimage() {
        let p = Arc::new(TablePermutation::random(12, 8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = CryptoDistribution::hard(BitVec::random(12, &mut rng), p.clone()).unwrap();
        let (pred, _) = train_efficient(&sample(&d, 30, &mut rng)).unwrap();
        let pre = p.trapdoor_inverse(pred.s_prime()).unwrap();
        for (row, &tag) in pred.basis().rows().iter().zip(pred.basis().tags()) {
            assert_eq!(pre.inner_product(row).unwrap(), tag);
        }
    }

    #[test]
    fn serialization_roundtrip_and_rejects() {
        let p = Arc::new(FeistelPermutation::new(16, 4, 8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = CryptoDistribution::hard(BitVec::random(16, &mut rng), p).unwrap();
        let (pred, _) = train_efficient(&sample(&d, 9, &mut rng)).unwrap();
        let bytes = pred.to_bytes();
        assert_eq!(&bytes[..6], b"IMPR\x01\x00");
        assert_eq!(ImproperPredictor::from_bytes(&bytes).unwrap(), pred);
        assert!(ImproperPredictor::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(ImproperPredictor::from_bytes(&bad).is_err());
        assert!(ImproperPredictor::from_bytes(b"nope").is_err());
    }
}
