//! Relative-frequency estimation of transition matrices from a classified panel.
//!
//! `counts[j][i]` tallies entities in state `i` at the origin year and state
//! `j` at the destination year; `probs[j][i] = counts[j][i] / sum_j counts[j][i]`.
//! Columns with no occupants are flagged as undefined rather than zero-filled.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::StateGrid;
use crate::error::{Error, Result};
use crate::matrix::ProbMatrix;

/// Integer transition tallies, indexed `(dest, origin)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    n: usize,
    data: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(n: usize) -> Self {
        CountMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        Ok(CountMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, dest: usize, origin: usize) -> u64 {
        self.data[dest * self.n + origin]
    }

    pub fn increment(&mut self, dest: usize, origin: usize) {
        self.data[dest * self.n + origin] += 1;
    }

    pub fn column_total(&self, origin: usize) -> u64 {
        (0..self.n).map(|j| self.get(j, origin)).sum()
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.n.max(1)).map(<[u64]>::to_vec).collect()
    }

    /// Elementwise sum; associative and commutative, so partial tallies can be merged in any order.
    pub fn merge(mut self, other: &CountMatrix) -> CountMatrix {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self
    }
}

/// Transition probabilities between two years, with the counts behind them
/// when they were estimated from data.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    origin_year: i32,
    dest_year: i32,
    counts: Option<CountMatrix>,
    probs: ProbMatrix,
    undefined_columns: BTreeSet<usize>,
}

impl TransitionMatrix {
    pub fn from_counts(origin_year: i32, dest_year: i32, counts: CountMatrix) -> Result<Self> {
        check_years(origin_year, dest_year)?;
        let n = counts.n();
        let mut probs = ProbMatrix::zeros(n);
        let mut undefined_columns = BTreeSet::new();
        for i in 0..n {
            let total = counts.column_total(i);
            if total == 0 {
                undefined_columns.insert(i);
                continue;
            }
            for j in 0..n {
                probs.set(j, i, counts.get(j, i) as f64 / total as f64);
            }
        }
        Ok(TransitionMatrix {
            origin_year,
            dest_year,
            counts: Some(counts),
            probs,
            undefined_columns,
        })
    }

    /// Wraps a probability matrix with no counts (published tables, products).
    /// All-zero columns are marked undefined.
    pub fn from_probabilities(origin_year: i32, dest_year: i32, probs: ProbMatrix) -> Result<Self> {
        check_years(origin_year, dest_year)?;
        let undefined_columns = (0..probs.n())
            .filter(|&i| probs.column(i).iter().all(|&p| p == 0.0))
            .collect();
        Ok(TransitionMatrix {
            origin_year,
            dest_year,
            counts: None,
            probs,
            undefined_columns,
        })
    }

    pub fn n_states(&self) -> usize {
        self.probs.n()
    }

    pub fn origin_year(&self) -> i32 {
        self.origin_year
    }

    pub fn dest_year(&self) -> i32 {
        self.dest_year
    }

    pub fn step(&self) -> i32 {
        self.dest_year - self.origin_year
    }

    pub fn counts(&self) -> Option<&CountMatrix> {
        self.counts.as_ref()
    }

    pub fn probs(&self) -> &ProbMatrix {
        &self.probs
    }

    pub fn prob(&self, dest: usize, origin: usize) -> f64 {
        self.probs.get(dest, origin)
    }

    pub fn undefined_columns(&self) -> &BTreeSet<usize> {
        &self.undefined_columns
    }

    pub fn is_defined(&self, origin: usize) -> bool {
        !self.undefined_columns.contains(&origin)
    }

    pub fn defined_columns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(|i| self.is_defined(*i))
    }

    /// Largest `|column sum - 1|` over defined columns.
    pub fn stochastic_deviation(&self) -> f64 {
        self.probs.stochastic_deviation(self.defined_columns())
    }

    /// Table layout: header `Size,0,..,N`, one row per destination state,
    /// probabilities rounded to 4 decimals. Undefined columns are left blank.
    pub fn to_table_csv(&self) -> String {
        let n = self.n_states();
        let mut out = String::from("Size");
        for i in 0..n {
            write!(out, ",{i}").unwrap();
        }
        out.push('\n');
        for j in 0..n {
            write!(out, "{j}").unwrap();
            for i in 0..n {
                if self.is_defined(i) {
                    write!(out, ",{:.4}", self.prob(j, i)).unwrap();
                } else {
                    out.push(',');
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            origin_year: self.origin_year,
            dest_year: self.dest_year,
            n_states: self.n_states(),
            probs: self.probs.rows(),
            counts: self.counts.as_ref().map(CountMatrix::rows),
            column_totals: self
                .counts
                .as_ref()
                .map(|c| (0..c.n()).map(|i| c.column_total(i)).collect()),
            undefined_columns: self.undefined_columns.iter().copied().collect(),
        }
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        match &json.counts {
            Some(rows) => Self::from_counts(json.origin_year, json.dest_year, CountMatrix::from_rows(rows)?),
            None => Self::from_probabilities(json.origin_year, json.dest_year, ProbMatrix::from_rows(&json.probs)?),
        }
    }
}

/// Full-precision serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub origin_year: i32,
    pub dest_year: i32,
    pub n_states: usize,
    /// Rows are destinations, columns origins.
    pub probs: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<Vec<Vec<u64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub column_totals: Option<Vec<u64>>,
    pub undefined_columns: Vec<usize>,
}

/// Parses the table layout written by [`TransitionMatrix::to_table_csv`].
/// Blank cells are read as 0.
pub fn parse_table_csv(text: &str) -> Result<ProbMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.get(0) != Some("Size") {
        return Err(Error::Parse("matrix table must start with a `Size` header".into()));
    }
    let n = headers.len() - 1;
    for (k, h) in headers.iter().skip(1).enumerate() {
        if h != k.to_string() {
            return Err(Error::Parse(format!("column header {} should be {k}", h)));
        }
    }
    let mut rows = Vec::with_capacity(n);
    for (j, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.get(0) != Some(j.to_string().as_str()) || rec.len() != n + 1 {
            return Err(Error::Parse(format!("malformed matrix row {j}")));
        }
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(i, v)| {
                if v.is_empty() {
                    return Ok(0.0);
                }
                v.parse::<f64>()
                    .ok()
                    .filter(|p| p.is_finite())
                    .ok_or_else(|| Error::Parse(format!("row {j} column {i}: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Parse(format!("expected {n} matrix rows, found {}", rows.len())));
    }
    ProbMatrix::from_rows(&rows)
}

/// Probability vector over states at one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistribution {
    pub year: i32,
    pub p: Vec<f64>,
}

impl MarginalDistribution {
    pub fn new(year: i32, p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if p.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotDistribution(sum));
        }
        Ok(MarginalDistribution { year, p })
    }

    pub fn indicator(year: i32, n_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; n_states];
        p[state] = 1.0;
        MarginalDistribution { year, p }
    }

    pub fn n_states(&self) -> usize {
        self.p.len()
    }
}

fn check_years(origin: i32, dest: i32) -> Result<()> {
    if dest <= origin {
        return Err(Error::YearOrder { origin, dest });
    }
    Ok(())
}

/// Tallies `(from, to)` pairs produced by `pick` for every entity row, in parallel.
fn tally<F>(states: &StateGrid, pick: F) -> CountMatrix
where
    F: Fn(&[usize]) -> Option<(usize, usize)> + Sync,
{
    let n = states.n_states();
    let width = states.years().len();
    states
        .states()
        .par_chunks(width * 4096)
        .map(|block| {
            let mut counts = CountMatrix::zeros(n);
            for row in block.chunks_exact(width) {
                if let Some((from, to)) = pick(row) {
                    counts.increment(to, from);
                }
            }
            counts
        })
        .reduce(|| CountMatrix::zeros(n), |a, b| a.merge(&b))
}

fn endpoints(states: &StateGrid, origin_year: i32, dest_year: i32) -> Result<(usize, usize)> {
    check_years(origin_year, dest_year)?;
    let years = states.years();
    Ok((years.offset(origin_year)?, years.offset(dest_year)?))
}

/// Two-cross-section estimator: entities absent (state 0) at both endpoint
/// years are left out, so `f_00` is always 0.
pub fn count_transitions(states: &StateGrid, origin_year: i32, dest_year: i32) -> Result<TransitionMatrix> {
    let (a, b) = endpoints(states, origin_year, dest_year)?;
    let counts = tally(states, |row| match (row[a], row[b]) {
        (0, 0) => None,
        pair => Some(pair),
    });
    TransitionMatrix::from_counts(origin_year, dest_year, counts)
}

/// Window estimator over a strongly balanced window: an entity absent at both
/// endpoints but present in some intermediate year counts as a 0 -> 0
/// transition; entities absent throughout the window are left out.
pub fn count_transitions_window(states: &StateGrid, origin_year: i32, dest_year: i32) -> Result<TransitionMatrix> {
    if dest_year - origin_year < 2 {
        return Err(Error::TooFewYears {
            needed: 3,
            got: (dest_year - origin_year + 1).max(0) as usize,
        });
    }
    let (a, b) = endpoints(states, origin_year, dest_year)?;
    let counts = tally(states, |row| match (row[a], row[b]) {
        (0, 0) if row[a..=b].iter().any(|&s| s != 0) => Some((0, 0)),
        (0, 0) => None,
        pair => Some(pair),
    });
    TransitionMatrix::from_counts(origin_year, dest_year, counts)
}

/// One matrix per consecutive year pair, in chronological order.
pub fn estimate_first_order_chain(states: &StateGrid) -> Result<Vec<TransitionMatrix>> {
    let years = states.years();
    if years.len() < 2 {
        return Err(Error::TooFewYears {
            needed: 2,
            got: years.len(),
        });
    }
    (years.start..years.end)
        .into_par_iter()
        .map(|y| count_transitions(states, y, y + 1))
        .collect()
}

/// Share of all grid entities in each state at `year`, state 0 included.
pub fn empirical_marginal(states: &StateGrid, year: i32) -> Result<MarginalDistribution> {
    let col = states.years().offset(year)?;
    let total = states.n_entities();
    if total == 0 {
        return Err(Error::EmptyPanel);
    }
    let mut tally = vec![0u64; states.n_states()];
    for row in states.rows() {
        tally[row[col]] += 1;
    }
    Ok(MarginalDistribution {
        year,
        p: tally.into_iter().map(|c| c as f64 / total as f64).collect(),
    })
}
