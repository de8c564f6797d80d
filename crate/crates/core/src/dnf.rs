//! 3-term DNF learned improperly as a single conjunction over clause triples.
//!
//! Literals are numbered `0..2d`: variable `i` (0-based) is `2i`, its negation
//! `2i + 1`. The expansion has one coordinate pair per ordered triple of
//! literals `(u, v, w)`, at index `((u * 2d + v) * 2d + w) * 2 + p`, where
//! `p = 0` holds the value of `u | v | w` and `p = 1` its negation.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::gf2::BitVec;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal(pub usize);

impl Literal {
    pub fn positive(var: usize) -> Self {
        Literal(2 * var)
    }

    pub fn negative(var: usize) -> Self {
        Literal(2 * var + 1)
    }

    pub fn var(self) -> usize {
        self.0 / 2
    }

    pub fn is_negated(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn complement(self) -> Self {
        Literal(self.0 ^ 1)
    }

    pub fn eval(self, x: &BitVec) -> bool {
        x.get(self.var()) != self.is_negated()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.is_negated() { "!" } else { "" };
        write!(f, "{neg}x{}", self.var() + 1)
    }
}

/// A conjunction of literals; contradictory sets collapse to `False`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Literals(BTreeSet<Literal>),
    False,
}

impl Term {
    pub fn new<I: IntoIterator<Item = Literal>>(lits: I) -> Self {
        let set: BTreeSet<Literal> = lits.into_iter().collect();
        if set.iter().any(|l| set.contains(&l.complement())) {
            Term::False
        } else {
            Term::Literals(set)
        }
    }

    pub fn eval(&self, x: &BitVec) -> bool {
        match self {
            Term::Literals(set) => set.iter().all(|l| l.eval(x)),
            Term::False => false,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::False => f.write_str("(false)"),
            Term::Literals(set) => {
                f.write_str("(")?;
                for (i, l) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    write!(f, "{l}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThreeDnf {
    d: usize,
    terms: [Term; 3],
}

impl ThreeDnf {
    pub fn new(d: usize, terms: [Term; 3]) -> Result<Self> {
        for t in &terms {
            if let Term::Literals(set) = t {
                if let Some(l) = set.iter().find(|l| l.var() >= d) {
                    return Err(Error::InvalidArgument(format!(
                        "literal {l} outside {d} variables"
                    )));
                }
            }
        }
        Ok(Self { d, terms })
    }

    /// Random formula whose terms each hold `min_lits..=max_lits` literals on
    /// distinct variables with random signs.
    pub fn random<R: Rng + ?Sized>(
        d: usize,
        min_lits: usize,
        max_lits: usize,
        rng: &mut R,
    ) -> Self {
        assert!(min_lits <= max_lits && max_lits <= d);
        let terms = std::array::from_fn(|_| {
            let k = rng.random_range(min_lits..=max_lits);
            Term::new(sample_indices(rng, d, k).into_iter().map(|v| {
                if rng.random() {
                    Literal::negative(v)
                } else {
                    Literal::positive(v)
                }
            }))
        });
        Self { d, terms }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[Term; 3] {
        &self.terms
    }

    pub fn eval(&self, x: &BitVec) -> Result<bool> {
        check_len(self.d, x.len())?;
        Ok(self.terms.iter().any(|t| t.eval(x)))
    }

    /// Parses `(x1 & !x3) | (x2) | ()` over `d` variables. `()` is the empty
    /// (always true) term and `(false)` the contradictory one.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let parts: Vec<&str> = text.split('|').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "expected 3 terms, found {}",
                parts.len()
            )));
        }
        let mut terms = Vec::with_capacity(3);
        for part in parts {
            let inner = part
                .strip_prefix('(')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("term {part:?} is not parenthesized")))?
                .trim();
            if inner == "false" {
                terms.push(Term::False);
                continue;
            }
            let mut lits = Vec::new();
            if !inner.is_empty() {
                for tok in inner.split('&').map(str::trim) {
                    let (neg, rest) = match tok.strip_prefix('!') {
                        Some(r) => (true, r.trim()),
                        None => (false, tok),
                    };
                    let idx: usize = rest
                        .strip_prefix('x')
                        .and_then(|n| n.parse().ok())
                        .filter(|&i| i >= 1)
                        .ok_or_else(|| Error::Parse(format!("bad literal {tok:?}")))?;
                    lits.push(if neg {
                        Literal::negative(idx - 1)
                    } else {
                        Literal::positive(idx - 1)
                    });
                }
            }
            terms.push(Term::new(lits));
        }
        let terms: [Term; 3] = terms.try_into().expect("three terms");
        Self::new(d, terms)
    }
}

impl fmt::Display for ThreeDnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} | {} | {}",
            self.terms[0], self.terms[1], self.terms[2]
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleExpansion {
    d: usize,
}

impl TripleExpansion {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "expansion needs at least one variable");
        Self { d }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `2 (2d)^3`.
    pub fn dimension(&self) -> usize {
        2 * (2 * self.d).pow(3)
    }

    pub fn index(&self, u: Literal, v: Literal, w: Literal, clause_true: bool) -> usize {
        let l = 2 * self.d;
        ((u.0 * l + v.0) * l + w.0) * 2 + usize::from(!clause_true)
    }

    /// Inverse of [`TripleExpansion::index`].
    pub fn decode(&self, index: usize) -> (Literal, Literal, Literal, bool) {
        let l = 2 * self.d;
        let clause_true = index.is_multiple_of(2);
        let t = index / 2;
        (
            Literal(t / (l * l)),
            Literal((t / l) % l),
            Literal(t % l),
            clause_true,
        )
    }

    pub fn expand(&self, x: &BitVec) -> Result<BitVec> {
        check_len(self.d, x.len())?;
        let l = 2 * self.d;
        let values: Vec<bool> = (0..l).map(|i| Literal(i).eval(x)).collect();
        // One block per (u, v): the pair for every w, in w order.
        let satisfied = BitVec::from_bools((0..l).flat_map(|_| [true, false]));
        let by_w = BitVec::from_bools(values.iter().flat_map(|&b| [b, !b]));
        let mut out = BitVec::zeros(self.dimension());
        for u in 0..l {
            for v in 0..l {
                let block = if values[u] || values[v] {
                    &satisfied
                } else {
                    &by_w
                };
                out.copy_from((u * l + v) * 2 * l, block);
            }
        }
        Ok(out)
    }

    pub fn expand_all(&self, xs: &[BitVec], exec: Execution) -> Result<Vec<BitVec>> {
        par::map_slice(exec, xs, |x| self.expand(x))
            .into_iter()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conjunction {
    kept: BitVec,
}

impl Conjunction {
    pub fn new(kept: BitVec) -> Self {
        Self { kept }
    }

    pub fn kept(&self) -> &BitVec {
        &self.kept
    }

    /// 1 iff every kept coordinate is 1 in `psi`.
    pub fn eval(&self, psi: &BitVec) -> Result<bool> {
        self.kept.is_subset_of(psi)
    }
}

/// Rewrites `T1 | T2 | T3` as the conjunction of `u | v | w` over
/// `u in T1, v in T2, w in T3`. False terms drop out of the disjunction, and a
/// repeated literal stands in for the missing slot (`a | a | b = a | b`).
pub fn dnf_to_conjunction(h: &ThreeDnf, te: &TripleExpansion) -> Result<Conjunction> {
    check_len(te.d(), h.d())?;
    let live: Vec<Vec<Literal>> = h
        .terms()
        .iter()
        .filter_map(|t| match t {
            Term::Literals(set) => Some(set.iter().copied().collect()),
            Term::False => None,
        })
        .collect();
    let mut kept = BitVec::zeros(te.dimension());
    match live.as_slice() {
        [] => {
            // both polarities of one triple: exactly one is ever set
            let l0 = Literal(0);
            kept.set(te.index(l0, l0, l0, true), true);
            kept.set(te.index(l0, l0, l0, false), true);
        }
        [a] => {
            for &u in a {
                kept.set(te.index(u, u, u, true), true);
            }
        }
        [a, b] => {
            for &u in a {
                for &w in b {
                    kept.set(te.index(u, u, w, true), true);
                }
            }
        }
        [a, b, c] => {
            for &u in a {
                for &v in b {
                    for &w in c {
                        kept.set(te.index(u, v, w, true), true);
                    }
                }
            }
        }
        _ => unreachable!("at most three terms"),
    }
    Ok(Conjunction { kept })
}

/// Elimination learner for conjunctions: keep every coordinate, then drop each
/// coordinate that is 0 on some positive example. Fails if the result accepts
/// a negative example.
pub fn greedy_conjunction_erm(dim: usize, data: &[(BitVec, bool)]) -> Result<Conjunction> {
    let mut kept = BitVec::ones(dim);
    for (psi, label) in data {
        check_len(dim, psi.len())?;
        if *label {
            kept.and_assign(psi)?;
        }
    }
    let conj = Conjunction { kept };
    for (index, (psi, label)) in data.iter().enumerate() {
        if !label && conj.eval(psi)? {
            return Err(Error::RealizabilityViolation { index });
        }
    }
    Ok(conj)
}
