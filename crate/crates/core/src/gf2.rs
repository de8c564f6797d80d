//! Bit-packed linear algebra over GF(2).
//!
//! [`BitVec`] packs bit `i` into word `i / 64` at position `i % 64`. Bits past
//! `len` in the last word are always zero, so word-wise equality, hashing and
//! parity are exact.
//!
//! [`Gf2Basis`] keeps a spanning set in reduced row-echelon form: every row has
//! a pivot column (its lowest set bit at insertion time) that is zero in all
//! other rows. Span queries then read coefficients straight off the pivot
//! columns, with no per-query elimination. Each row also carries a tag bit that
//! is XORed along with the row during elimination, so a tag assigned linearly
//! to the inserted vectors stays consistent for every reduced row.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_len, Error, Result};

const WORD_BITS: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        v.clear_tail();
        v
    }

    /// Unit vector with bit `i` set.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(i, true);
        v
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % WORD_BITS == 0 {
                words.push(0);
            }
            if b {
                words[len / WORD_BITS] |= 1 << (len % WORD_BITS);
            }
            len += 1;
        }
        Self { words, len }
    }

    /// Low `len` bits of `value`, bit `i` of the integer becoming bit `i`.
    ///
    /// # Panics
    /// If `len > 64`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD_BITS, "from_u64 supports at most 64 bits");
        let mut v = Self {
            words: if len == 0 { Vec::new() } else { vec![value] },
            len,
        };
        v.clear_tail();
        v
    }

    /// Inverse of [`BitVec::from_u64`]; `None` when `len > 64`.
    pub fn to_u64(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            l if l <= WORD_BITS => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self {
            words: (0..words_for(len)).map(|_| rng.random()).collect(),
            len,
        };
        v.clear_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range (len {})",
            self.len
        );
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range (len {})",
            self.len
        );
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the lowest set bit.
    pub fn lowest_set_bit(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * WORD_BITS + w.trailing_zeros() as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn ones_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD_BITS + b)
            })
        })
    }

    /// `self ^= other`.
    pub fn xor_assign(&mut self, other: &BitVec) -> Result<()> {
        check_len(self.len, other.len)?;
        self.xor_unchecked(other);
        Ok(())
    }

    /// `self &= other`.
    pub fn and_assign(&mut self, other: &BitVec) -> Result<()> {
        check_len(self.len, other.len)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
        Ok(())
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitVec) -> Result<bool> {
        check_len(self.len, other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0))
    }

    /// Inner product over GF(2): parity of the bitwise AND.
    pub fn inner_product(&self, other: &BitVec) -> Result<bool> {
        check_len(self.len, other.len)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn xor_unchecked(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub(crate) fn dot_unchecked(&self, other: &BitVec) -> bool {
        let acc = self
            .words
            .iter()
            .zip(&other.words)
            .fold(0u64, |acc, (a, b)| acc ^ (a & b));
        acc.count_ones() & 1 == 1
    }

    /// Copies all bits of `src` into `self[offset..offset + src.len()]`.
    pub fn copy_from(&mut self, offset: usize, src: &BitVec) {
        assert!(
            offset + src.len <= self.len,
            "copy of {} bits at {offset} overruns length {}",
            src.len,
            self.len
        );
        let mut done = 0;
        while done < src.len {
            let chunk = (src.len - done).min(WORD_BITS);
            let bits = src.read_bits(done, chunk);
            self.write_bits(offset + done, chunk, bits);
            done += chunk;
        }
    }

    /// Reads `width <= 64` bits starting at `start`, low bit first.
    fn read_bits(&self, start: usize, width: usize) -> u64 {
        debug_assert!(width <= WORD_BITS && start + width <= self.len);
        let (wi, bi) = (start / WORD_BITS, start % WORD_BITS);
        let mut v = self.words[wi] >> bi;
        if bi != 0 && bi + width > WORD_BITS {
            v |= self.words[wi + 1] << (WORD_BITS - bi);
        }
        if width < WORD_BITS {
            v &= (1u64 << width) - 1;
        }
        v
    }

    fn write_bits(&mut self, start: usize, width: usize, bits: u64) {
        debug_assert!(width <= WORD_BITS && start + width <= self.len);
        let mask = if width == WORD_BITS {
            u64::MAX
        } else {
            (1u64 << width) - 1
        };
        let bits = bits & mask;
        let (wi, bi) = (start / WORD_BITS, start % WORD_BITS);
        self.words[wi] = (self.words[wi] & !(mask << bi)) | (bits << bi);
        if bi != 0 && bi + width > WORD_BITS {
            let spill = WORD_BITS - bi;
            let hi_mask = mask >> spill;
            self.words[wi + 1] = (self.words[wi + 1] & !hi_mask) | (bits >> spill);
        }
    }

    fn clear_tail(&mut self) {
        let r = self.len % WORD_BITS;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    /// Binary form: `u32` little-endian bit count, then `ceil(n/8)` bytes with
    /// bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u32).to_le_bytes());
        for i in 0..self.len.div_ceil(8) {
            out.push((self.words[i / 8] >> ((i % 8) * 8)) as u8);
        }
        out
    }

    /// Parses one vector in binary form and returns it with the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let header: [u8; 4] = bytes
            .get(..4)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::Parse("truncated bit-vector length prefix".into()))?;
        let len = u32::from_le_bytes(header) as usize;
        let nbytes = len.div_ceil(8);
        let body = bytes
            .get(4..4 + nbytes)
            .ok_or_else(|| Error::Parse(format!("truncated bit-vector body ({len} bits)")))?;
        let mut v = Self::zeros(len);
        for (i, &byte) in body.iter().enumerate() {
            v.words[i / 8] |= (byte as u64) << ((i % 8) * 8);
        }
        if !len.is_multiple_of(8) && body[nbytes - 1] >> (len % 8) != 0 {
            return Err(Error::Parse("nonzero padding bits in bit-vector".into()));
        }
        Ok((v, 4 + nbytes))
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl FromStr for BitVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitVec::from_bools)
    }
}

/// Lexicographic order of the textual form (index 0 leftmost, `0 < 1`).
impl Ord for BitVec {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(&other.words) {
            let diff = a ^ b;
            if diff != 0 {
                let bit = 1u64 << diff.trailing_zeros();
                return if a & bit == 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for BitVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Checked inner product `<a, b>` over GF(2).
pub fn inner_product(a: &BitVec, b: &BitVec) -> Result<bool> {
    a.inner_product(b)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2Basis {
    dim: usize,
    rows: Vec<BitVec>,
    pivots: Vec<usize>,
    tags: Vec<bool>,
}

impl Gf2Basis {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            pivots: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn tags(&self) -> &[bool] {
        &self.tags
    }

    /// Inserts `v`; returns whether the rank grew.
    pub fn insert(&mut self, v: &BitVec) -> Result<bool> {
        self.insert_tagged(v, false)
    }

    /// Inserts `v` carrying `tag`. When `v` is already spanned the tag is
    /// discarded, so consistency of tags with the spanned combination is the
    /// caller's contract.
    pub fn insert_tagged(&mut self, v: &BitVec, tag: bool) -> Result<bool> {
        check_len(self.dim, v.len())?;
        let mut residual = v.clone();
        let mut tag = tag;
        for ((row, &p), &t) in self.rows.iter().zip(&self.pivots).zip(&self.tags) {
            if residual.get(p) {
                residual.xor_unchecked(row);
                tag ^= t;
            }
        }
        let Some(pivot) = residual.lowest_set_bit() else {
            return Ok(false);
        };
        for (row, t) in self.rows.iter_mut().zip(self.tags.iter_mut()) {
            if row.get(pivot) {
                row.xor_unchecked(&residual);
                *t ^= tag;
            }
        }
        let at = self.pivots.partition_point(|&p| p < pivot);
        self.rows.insert(at, residual);
        self.pivots.insert(at, pivot);
        self.tags.insert(at, tag);
        Ok(true)
    }

    /// Coefficients `c` (one bit per row) with `sum c_i row_i = v`, or `None`
    /// when `v` lies outside the span.
    pub fn in_span(&self, v: &BitVec) -> Result<Option<BitVec>> {
        check_len(self.dim, v.len())?;
        let coeffs = BitVec::from_bools(self.pivots.iter().map(|&p| v.get(p)));
        let mut residual = v.clone();
        for (i, row) in self.rows.iter().enumerate() {
            if coeffs.get(i) {
                residual.xor_unchecked(row);
            }
        }
        Ok(residual.is_zero().then_some(coeffs))
    }

    pub fn contains(&self, v: &BitVec) -> Result<bool> {
        Ok(self.in_span(v)?.is_some())
    }

    /// XOR of the tags selected by the span coefficients of `v`, or `None`
    /// when `v` is outside the span.
    pub fn span_tag(&self, v: &BitVec) -> Result<Option<bool>> {
        Ok(self
            .in_span(v)?
            .map(|c| c.ones_indices().fold(false, |acc, i| acc ^ self.tags[i])))
    }

    /// Uniform draw from the spanned subspace.
    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        let mut v = BitVec::zeros(self.dim);
        for row in &self.rows {
            if rng.random::<bool>() {
                v.xor_unchecked(row);
            }
        }
        v
    }
}
