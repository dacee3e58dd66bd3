//! Gated rectangular assignment.
//!
//! Gated-out entries are `+inf`. [`solve`] returns the one-to-one assignment
//! that first maximizes the number of finite pairs and then minimizes their
//! summed cost. Internally each entry is lifted to a lexicographic cost
//! `(infeasible count, finite cost)` and the Kuhn–Munkres algorithm runs on
//! that ordered group with row/column potentials, so no large-M constant ever
//! mixes with the finite costs.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use crate::error::{Error, Result};

/// Dense row-major cost matrix. Entries are non-negative or `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// A `rows × cols` matrix with every entry `+inf`.
    pub fn infeasible(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![f64::INFINITY; rows * cols] }
    }

    /// Fills the matrix from `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged cost matrix".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "cost matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|c| c.is_nan() || **c < 0.0 || **c == f64::NEG_INFINITY) {
            return Err(Error::InvalidInput(format!("invalid cost entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Replaces every entry strictly greater than `tau` with `+inf`.
    pub fn gate(mut self, tau: f64) -> Self {
        for c in &mut self.data {
            if *c > tau {
                *c = f64::INFINITY;
            }
        }
        self
    }

    /// Like [`CostMatrix::gate`] with one threshold per column.
    pub fn gate_columns(mut self, taus: &[f64]) -> Self {
        assert_eq!(taus.len(), self.cols, "one threshold per column");
        for (k, c) in self.data.iter_mut().enumerate() {
            if *c > taus[k % self.cols] {
                *c = f64::INFINITY;
            }
        }
        self
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }
}

/// One-to-one `(row, col)` pairs, sorted by row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sum of the paired costs, accumulated in row order.
    pub fn total_cost(&self, matrix: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| matrix.get(i, j)).sum()
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_for_col(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Lexicographic cost: number of infeasible entries used, then finite cost.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LexCost {
    infeasible: i64,
    cost: f64,
}

impl LexCost {
    const ZERO: LexCost = LexCost { infeasible: 0, cost: 0.0 };
    const UNBOUNDED: LexCost = LexCost { infeasible: i64::MAX / 4, cost: 0.0 };

    fn of(entry: f64) -> Self {
        if entry.is_finite() {
            LexCost { infeasible: 0, cost: entry }
        } else {
            LexCost { infeasible: 1, cost: 0.0 }
        }
    }
}

impl PartialOrd for LexCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.infeasible.cmp(&other.infeasible) {
            Ordering::Equal => self.cost.partial_cmp(&other.cost),
            ord => Some(ord),
        }
    }
}

impl Add for LexCost {
    type Output = LexCost;
    fn add(self, o: LexCost) -> LexCost {
        LexCost { infeasible: self.infeasible + o.infeasible, cost: self.cost + o.cost }
    }
}

impl Sub for LexCost {
    type Output = LexCost;
    fn sub(self, o: LexCost) -> LexCost {
        LexCost { infeasible: self.infeasible - o.infeasible, cost: self.cost - o.cost }
    }
}

impl AddAssign for LexCost {
    fn add_assign(&mut self, o: LexCost) {
        *self = *self + o;
    }
}

impl SubAssign for LexCost {
    fn sub_assign(&mut self, o: LexCost) {
        *self = *self - o;
    }
}

/// Optimal gated assignment. Pairs through `+inf` entries never appear.
pub fn solve(matrix: &CostMatrix) -> Assignment {
    if matrix.is_empty() {
        return Assignment::default();
    }
    let mut pairs = if matrix.rows <= matrix.cols {
        munkres(matrix)
    } else {
        munkres(&matrix.transpose()).into_iter().map(|(j, i)| (i, j)).collect()
    };
    pairs.retain(|&(i, j)| matrix.get(i, j).is_finite());
    pairs.sort_unstable();
    Assignment { pairs }
}

/// Kuhn–Munkres with potentials for `rows <= cols`; every row is assigned.
/// Columns are scanned in ascending order and ties keep the lowest index.
fn munkres(m: &CostMatrix) -> Vec<(usize, usize)> {
    let (n, k) = (m.rows, m.cols);
    let cost = |i: usize, j: usize| LexCost::of(m.get(i - 1, j - 1));
    // 1-based: index 0 is the virtual root column/row.
    let mut u = vec![LexCost::ZERO; n + 1];
    let mut v = vec![LexCost::ZERO; k + 1];
    let mut row_of_col = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![LexCost::UNBOUNDED; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = LexCost::UNBOUNDED;
            let mut j1 = 0usize;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=k)
        .filter(|&j| row_of_col[j] != 0)
        .map(|j| (row_of_col[j] - 1, j - 1))
        .collect()
}
