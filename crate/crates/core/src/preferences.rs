//! Pairwise preferences over `d` items.
//!
//! The lookup-table class contains every Boolean function of the ordered pair
//! `(i, j)`; its ERM is a cell-wise majority vote in a single pass. The ordering
//! class (`h_w(i, j) = [w_i > w_j]`) is solved only by exhaustive search over
//! total orders, which is exact but limited to small `d`.

use std::io::{Read, Write};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_BRUTE_FORCE_ITEMS: usize = 8;

/// One labelled pair. Items are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefExample {
    pub i: usize,
    pub j: usize,
    /// True when `i` is preferred to `j`.
    pub label: bool,
}

impl PrefExample {
    pub fn new(i: usize, j: usize, label: bool, d: usize) -> Result<Self> {
        let ex = Self { i, j, label };
        ex.check(d)?;
        Ok(ex)
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.i == 0 || self.j == 0 || self.i > d || self.j > d || self.i == self.j {
            return Err(Error::InvalidArgument(format!(
                "pair ({}, {}) invalid for {d} items",
                self.i, self.j
            )));
        }
        Ok(())
    }
}

pub trait PairPredictor {
    fn predict(&self, i: usize, j: usize) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupPredictor {
    d: usize,
    table: Vec<bool>,
    seen: Vec<bool>,
}

impl LookupPredictor {
    /// A fixed table; `cells[(i-1)*d + (j-1)]` is the prediction for `(i, j)`.
    pub fn from_table(d: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), d * d);
        Self {
            d,
            seen: vec![true; d * d],
            table: cells,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn is_seen(&self, i: usize, j: usize) -> bool {
        self.seen[(i - 1) * self.d + (j - 1)]
    }
}

impl PairPredictor for LookupPredictor {
    fn predict(&self, i: usize, j: usize) -> bool {
        self.table[(i - 1) * self.d + (j - 1)]
    }
}

/// Cell-wise majority vote; ties and unseen cells predict 0.
pub fn lookup_erm(data: &[PrefExample], d: usize) -> Result<LookupPredictor> {
    let mut ones = vec![0u32; d * d];
    let mut total = vec![0u32; d * d];
    for ex in data {
        ex.check(d)?;
        let c = (ex.i - 1) * d + (ex.j - 1);
        total[c] += 1;
        ones[c] += ex.label as u32;
    }
    Ok(LookupPredictor {
        d,
        table: ones.iter().zip(&total).map(|(&o, &t)| 2 * o > t).collect(),
        seen: total.iter().map(|&t| t > 0).collect(),
    })
}

/// Scores inducing a strict total order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPredictor {
    pub w: Vec<f64>,
}

impl WeightPredictor {
    /// Scores for an order listed from most to least preferred (1-based items).
    pub fn from_order(order: &[usize]) -> Self {
        let d = order.len();
        let mut w = vec![0.0; d];
        for (rank, &item) in order.iter().enumerate() {
            w[item - 1] = (d - rank) as f64;
        }
        Self { w }
    }

    /// Items from most to least preferred.
    pub fn order(&self) -> Vec<usize> {
        let mut items: Vec<usize> = (1..=self.w.len()).collect();
        items.sort_by(|&a, &b| self.w[b - 1].total_cmp(&self.w[a - 1]).then(a.cmp(&b)));
        items
    }
}

impl PairPredictor for WeightPredictor {
    fn predict(&self, i: usize, j: usize) -> bool {
        self.w[i - 1] > self.w[j - 1]
    }
}

/// Exhaustive ERM over all `d!` total orders. Orders are visited in
/// lexicographic order of their most-to-least-preferred listing and the first
/// minimizer wins.
pub fn weight_erm_bruteforce(data: &[PrefExample], d: usize) -> Result<WeightPredictor> {
    if d > MAX_BRUTE_FORCE_ITEMS {
        return Err(Error::TooLarge {
            what: "item count for order search",
            value: d,
            max: MAX_BRUTE_FORCE_ITEMS,
        });
    }
    // Per-cell label counts make each order's error O(d^2) instead of O(m).
    let mut ones = vec![0u32; d * d];
    let mut zeros = vec![0u32; d * d];
    for ex in data {
        ex.check(d)?;
        let c = (ex.i - 1) * d + (ex.j - 1);
        if ex.label {
            ones[c] += 1;
        } else {
            zeros[c] += 1;
        }
    }
    let mut rank = vec![0usize; d];
    let mut best: Option<(u32, Vec<usize>)> = None;
    for order in (1..=d).permutations(d) {
        for (r, &item) in order.iter().enumerate() {
            rank[item - 1] = r;
        }
        let mut errors = 0;
        for i in 0..d {
            for j in 0..d {
                let c = i * d + j;
                errors += if rank[i] < rank[j] { zeros[c] } else { ones[c] };
            }
        }
        if best.as_ref().is_none_or(|(e, _)| errors < *e) {
            best = Some((errors, order));
        }
    }
    let (_, order) = best.expect("at least one order");
    Ok(WeightPredictor::from_order(&order))
}

/// Mean 0-1 disagreement; 0 on empty data.
pub fn eval_pref(pred: &dyn PairPredictor, data: &[PrefExample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let wrong = data
        .iter()
        .filter(|ex| pred.predict(ex.i, ex.j) != ex.label)
        .count();
    wrong as f64 / data.len() as f64
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    i: usize,
    j: usize,
    label: u8,
}

pub fn write_dataset<W: Write>(out: W, data: &[PrefExample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for ex in data {
        w.serialize(CsvRow {
            i: ex.i,
            j: ex.j,
            label: ex.label as u8,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R, d: usize) -> Result<Vec<PrefExample>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            let label = match row.label {
                0 => false,
                1 => true,
                v => return Err(Error::Parse(format!("label must be 0 or 1, got {v}"))),
            };
            PrefExample::new(row.i, row.j, label, d)
        })
        .collect()
}
