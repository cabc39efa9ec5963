//! Dense square matrices in the column-stochastic convention:
//! entry `(j, i)` is the probability of moving from origin `i` to destination `j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    n: usize,
    /// Row-major: `data[j * n + i]`.
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn zeros(n: usize) -> Self {
        ProbMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.set(k, k, 1.0);
        }
        m
    }

    /// Builds from rows indexed by destination.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        Ok(ProbMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                m.set(j, i, f(j, i));
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, dest: usize, origin: usize) -> f64 {
        self.data[dest * self.n + origin]
    }

    #[inline]
    pub fn set(&mut self, dest: usize, origin: usize, value: f64) {
        self.data[dest * self.n + origin] = value;
    }

    pub fn row(&self, dest: usize) -> &[f64] {
        &self.data[dest * self.n..(dest + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn column(&self, origin: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, origin)).collect()
    }

    pub fn column_sum(&self, origin: usize) -> f64 {
        (0..self.n).map(|j| self.get(j, origin)).sum()
    }

    pub fn row_sum(&self, dest: usize) -> f64 {
        self.row(dest).iter().sum()
    }

    /// Matrix product `self * rhs`. With column-stochastic factors,
    /// `later.mul(&earlier)` is the two-step transition.
    pub fn mul(&self, rhs: &ProbMatrix) -> Result<ProbMatrix> {
        self.check_dim(rhs.n)?;
        let n = self.n;
        let mut out = ProbMatrix::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let a = self.get(j, k);
                if a == 0.0 {
                    continue;
                }
                for i in 0..n {
                    out.data[j * n + i] += a * rhs.get(k, i);
                }
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        Ok((0..self.n)
            .map(|j| self.row(j).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self^d` by repeated squaring; `d = 0` gives the identity.
    pub fn power(&self, mut d: u32) -> ProbMatrix {
        let mut result = ProbMatrix::identity(self.n);
        let mut base = self.clone();
        while d > 0 {
            if d & 1 == 1 {
                result = result.mul(&base).expect("square");
            }
            d >>= 1;
            if d > 0 {
                base = base.mul(&base).expect("square");
            }
        }
        result
    }

    pub fn max_abs_diff(&self, other: &ProbMatrix) -> Result<f64> {
        self.check_dim(other.n)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest `|column sum - 1|` over the given columns.
    pub fn stochastic_deviation(&self, columns: impl IntoIterator<Item = usize>) -> f64 {
        columns
            .into_iter()
            .map(|i| (self.column_sum(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Checks every column sums to 1 within `tol` and all entries are in `[0, 1]`.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        if let Some((idx, &bad)) = self
            .data
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && **p <= 1.0 + tol))
        {
            return Err(Error::NotStochastic {
                column: idx % self.n,
                sum: bad,
            });
        }
        for i in 0..self.n {
            let sum = self.column_sum(i);
            if (sum - 1.0).abs() > tol {
                return Err(Error::NotStochastic { column: i, sum });
            }
        }
        Ok(())
    }

    /// Rescales every nonzero column to sum to one.
    pub fn normalize_columns(&mut self) {
        for i in 0..self.n {
            let sum = self.column_sum(i);
            if sum > 0.0 {
                for j in 0..self.n {
                    let v = self.get(j, i) / sum;
                    self.set(j, i, v);
                }
            }
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found,
            });
        }
        Ok(())
    }
}
