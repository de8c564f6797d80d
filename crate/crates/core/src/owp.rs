//! Permutations of `{0,1}^n` standing in for a one-way permutation.
//!
//! Neither instantiation is one-way. They exist to give the learners a
//! bijection whose inversion costs a full `2^n` scan, so the harness can measure
//! exponential inversion against polynomial learning. Both keep a trapdoor
//! inverse for test oracles; learners only ever see [`PermutationOracle`].
//!
//! Points are handled as `u64` internally (bit `i` of the integer is bit `i` of
//! the [`BitVec`]), which limits `n` to 64.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gf2::BitVec;
use crate::par::{self, Execution};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 26;
pub const MAX_TABLE_BITS: usize = 24;
pub const DEFAULT_FEISTEL_ROUNDS: usize = 4;

pub trait PermutationOracle: Send + Sync {
    fn n(&self) -> usize;

    fn forward_u64(&self, x: u64) -> u64;

    fn id(&self) -> String;

    fn forward(&self, x: &BitVec) -> Result<BitVec> {
        check_len(self.n(), x.len())?;
        let v = x.to_u64().expect("n <= 64 by construction");
        Ok(BitVec::from_u64(self.forward_u64(v), self.n()))
    }
}

/// Hidden inverse. Test oracles and data generators that must certify example
/// membership use it; no learner takes this trait.
pub trait Trapdoor: PermutationOracle {
    fn trapdoor_inverse_u64(&self, s: u64) -> u64;

    fn trapdoor_inverse(&self, s: &BitVec) -> Result<BitVec> {
        check_len(self.n(), s.len())?;
        let v = s.to_u64().expect("n <= 64 by construction");
        Ok(BitVec::from_u64(self.trapdoor_inverse_u64(v), self.n()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForce {
    pub cap: usize,
    pub exec: Execution,
}

impl Default for BruteForce {
    fn default() -> Self {
        Self {
            cap: DEFAULT_BRUTE_FORCE_CAP,
            exec: Execution::Parallel,
        }
    }
}

/// Exhaustive inversion with the default cap.
pub fn invert_bruteforce(p: &dyn PermutationOracle, s: &BitVec) -> Result<BitVec> {
    invert_bruteforce_with(p, s, BruteForce::default())
}

/// Scans all `2^n` candidates for the unique `x` with `P(x) = s`.
pub fn invert_bruteforce_with(
    p: &dyn PermutationOracle,
    s: &BitVec,
    cfg: BruteForce,
) -> Result<BitVec> {
    let n = p.n();
    check_len(n, s.len())?;
    if n > cfg.cap {
        return Err(Error::BruteForceCap { n, cap: cfg.cap });
    }
    let target = s.to_u64().expect("n <= cap <= 64");
    let x = par::find_unique(cfg.exec, 1u64 << n, |x| p.forward_u64(x) == target)
        .expect("forward is a bijection");
    Ok(BitVec::from_u64(x, n))
}

fn mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[derive(Clone)]
pub struct TablePermutation {
    n: usize,
    table: Vec<u32>,
    inverse: Vec<u32>,
    label: String,
}

impl TablePermutation {
    pub fn identity(n: usize) -> Result<Self> {
        Self::check_size(n)?;
        let table: Vec<u32> = (0..1u32 << n).collect();
        Ok(Self {
            n,
            inverse: table.clone(),
            table,
            label: format!("table-identity-n{n}"),
        })
    }

    /// Uniformly random permutation drawn from `seed`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        Self::check_size(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table: Vec<u32> = (0..1u32 << n).collect();
        table.shuffle(&mut rng);
        Self::from_table(table).map(|mut t| {
            t.label = format!("table-n{n}-seed{seed}");
            t
        })
    }

    /// Wraps an explicit table; it must be a permutation of `0..2^n`.
    pub fn from_table(table: Vec<u32>) -> Result<Self> {
        let size = table.len();
        if !size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "table length {size} is not a power of two"
            )));
        }
        let n = size.trailing_zeros() as usize;
        Self::check_size(n)?;
        let mut inverse = vec![u32::MAX; size];
        for (x, &y) in table.iter().enumerate() {
            let slot = inverse
                .get_mut(y as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("table value {y} out of range")))?;
            if *slot != u32::MAX {
                return Err(Error::InvalidArgument(format!("table value {y} repeated")));
            }
            *slot = x as u32;
        }
        Ok(Self {
            n,
            table,
            inverse,
            label: format!("table-n{n}"),
        })
    }

    fn check_size(n: usize) -> Result<()> {
        if n > MAX_TABLE_BITS {
            Err(Error::TooLarge {
                what: "table permutation bit-width",
                value: n,
                max: MAX_TABLE_BITS,
            })
        } else {
            Ok(())
        }
    }
}

impl PermutationOracle for TablePermutation {
    fn n(&self) -> usize {
        self.n
    }

    fn forward_u64(&self, x: u64) -> u64 {
        self.table[x as usize] as u64
    }

    fn id(&self) -> String {
        self.label.clone()
    }
}

impl Trapdoor for TablePermutation {
    fn trapdoor_inverse_u64(&self, s: u64) -> u64 {
        self.inverse[s as usize] as u64
    }
}

/// Balanced Feistel network on `n = 2h` bits. The low half is the left block.
#[derive(Clone, Debug)]
pub struct FeistelPermutation {
    n: usize,
    keys: Vec<u64>,
    seed: u64,
}

impl FeistelPermutation {
    pub fn new(n: usize, rounds: usize, seed: u64) -> Result<Self> {
        if !n.is_multiple_of(2) || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "Feistel bit-width must be even and positive, got {n}"
            )));
        }
        if n > 64 {
            return Err(Error::TooLarge {
                what: "Feistel bit-width",
                value: n,
                max: 64,
            });
        }
        if rounds < 4 {
            return Err(Error::InvalidArgument(format!(
                "Feistel needs at least 4 rounds, got {rounds}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = (0..rounds).map(|_| rng.random()).collect();
        Ok(Self { n, keys, seed })
    }

    pub fn rounds(&self) -> usize {
        self.keys.len()
    }

    fn half(&self) -> usize {
        self.n / 2
    }

    fn round_fn(&self, block: u64, key: u64) -> u64 {
        splitmix64(block ^ key) & mask(self.half())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PermutationOracle for FeistelPermutation {
    fn n(&self) -> usize {
        self.n
    }

    fn forward_u64(&self, x: u64) -> u64 {
        let h = self.half();
        let (mut left, mut right) = (x & mask(h), (x >> h) & mask(h));
        for &k in &self.keys {
            let next = left ^ self.round_fn(right, k);
            left = right;
            right = next;
        }
        left | (right << h)
    }

    fn id(&self) -> String {
        format!("feistel-n{}-r{}-seed{}", self.n, self.keys.len(), self.seed)
    }
}

impl Trapdoor for FeistelPermutation {
    fn trapdoor_inverse_u64(&self, s: u64) -> u64 {
        let h = self.half();
        let (mut left, mut right) = (s & mask(h), (s >> h) & mask(h));
        for &k in self.keys.iter().rev() {
            let prev = right ^ self.round_fn(left, k);
            right = left;
            left = prev;
        }
        left | (right << h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermutationKind {
    Table,
    Feistel,
}

/// Construction parameters as they appear in configs and on the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationSpec {
    pub kind: PermutationKind,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

impl PermutationSpec {
    pub fn build(&self) -> Result<Permutation> {
        match self.kind {
            PermutationKind::Table => {
                TablePermutation::random(self.n, self.seed).map(Permutation::Table)
            }
            PermutationKind::Feistel => FeistelPermutation::new(
                self.n,
                self.rounds.unwrap_or(DEFAULT_FEISTEL_ROUNDS),
                self.seed,
            )
            .map(Permutation::Feistel),
        }
    }
}

#[derive(Clone)]
pub enum Permutation {
    Table(TablePermutation),
    Feistel(FeistelPermutation),
}

impl PermutationOracle for Permutation {
    fn n(&self) -> usize {
        match self {
            Permutation::Table(p) => p.n(),
            Permutation::Feistel(p) => p.n(),
        }
    }

    fn forward_u64(&self, x: u64) -> u64 {
        match self {
            Permutation::Table(p) => p.forward_u64(x),
            Permutation::Feistel(p) => p.forward_u64(x),
        }
    }

    fn id(&self) -> String {
        match self {
            Permutation::Table(p) => p.id(),
            Permutation::Feistel(p) => p.id(),
        }
    }
}

impl Trapdoor for Permutation {
    fn trapdoor_inverse_u64(&self, s: u64) -> u64 {
        match self {
            Permutation::Table(p) => p.trapdoor_inverse_u64(s),
            Permutation::Feistel(p) => p.trapdoor_inverse_u64(s),
        }
    }
}
