//! Row-bounded datasets, privacy budgets and second-moment accumulation.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::linalg::SymMatrix;

/// `(ε, δ)` pair with `ε > 0` and `0 < δ < 1/e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid!("epsilon must be positive and finite, got {epsilon}"));
        }
        if !(delta > 0.0 && delta < libm::exp(-1.0)) {
            return Err(invalid!("delta must lie in (0, 1/e), got {delta}"));
        }
        Ok(Self { epsilon, delta })
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `ln(c / δ)`.
    #[inline]
    pub fn log_ratio(&self, c: f64) -> f64 {
        libm::log(c / self.delta)
    }
}

/// `n × d` real matrix whose rows have L2 norm at most `row_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_bound: f64,
}

/// Slack allowed when validating row norms that were produced by rescaling.
const ROW_BOUND_SLACK: f64 = 1e-12;

fn check_shape(len: usize, cols: usize, row_bound: f64) -> Result<usize> {
    if cols < 2 {
        return Err(invalid!("a dataset needs at least 2 columns, got {cols}"));
    }
    if len == 0 || !len.is_multiple_of(cols) {
        return Err(invalid!("data length {len} is not a positive multiple of {cols} columns"));
    }
    if !(row_bound > 0.0 && row_bound.is_finite()) {
        return Err(invalid!("row bound must be positive and finite, got {row_bound}"));
    }
    Ok(len / cols)
}

#[inline]
fn norm(row: &[f64]) -> f64 {
    libm::sqrt(row.iter().map(|v| v * v).sum())
}

/// Shrinks `row` in place to norm `row_bound` if it is longer; shorter rows are untouched.
/// Returns whether the row was rescaled.
pub fn clip_row(row: &mut [f64], row_bound: f64) -> bool {
    let len = norm(row);
    if len > row_bound {
        let scale = row_bound / len;
        row.iter_mut().for_each(|v| *v *= scale);
        true
    } else {
        false
    }
}

/// Rescales every row longer than `row_bound` to have norm exactly `row_bound`.
///
/// `data` is row-major with `cols` columns.
pub fn clip_rows(mut data: Vec<f64>, cols: usize, row_bound: f64) -> Result<Dataset> {
    let rows = check_shape(data.len(), cols, row_bound)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("dataset contains non-finite entries"));
    }
    for row in data.chunks_exact_mut(cols) {
        clip_row(row, row_bound);
    }
    Ok(Dataset {
        rows,
        cols,
        data,
        row_bound,
    })
}

impl Dataset {
    /// Wraps row-major data that already satisfies the row bound.
    pub fn new(data: Vec<f64>, cols: usize, row_bound: f64) -> Result<Self> {
        let rows = check_shape(data.len(), cols, row_bound)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("dataset contains non-finite entries"));
        }
        for (i, row) in data.chunks_exact(cols).enumerate() {
            let len = norm(row);
            if len > row_bound * (1.0 + ROW_BOUND_SLACK) {
                return Err(invalid!("row {i} has norm {len} > bound {row_bound}"));
            }
        }
        Ok(Self {
            rows,
            cols,
            data,
            row_bound,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row_bound(&self) -> f64 {
        self.row_bound
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }
}

/// Single-pass accumulator for `Σᵢ rowᵢ rowᵢᵀ`.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    sum: SymMatrix,
    rows: usize,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: SymMatrix::zeros(dim),
            rows: 0,
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        let d = self.sum.dim();
        debug_assert_eq!(row.len(), d);
        for i in 0..d {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..d {
                self.sum.add_at(i, j, ri * row[j]);
            }
        }
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_gram(self) -> SymMatrix {
        self.sum
    }

    pub fn finish(self, row_bound: f64) -> Result<SecondMoment> {
        SecondMoment::new(self.sum, self.rows, row_bound)
    }
}

/// `AᵀA` computed by streaming over the rows once.
pub fn gram(a: &Dataset) -> SymMatrix {
    let mut acc = GramAccumulator::new(a.cols());
    for row in a.iter_rows() {
        acc.push(row);
    }
    acc.into_gram()
}

/// The sufficient statistics every mechanism needs: `AᵀA`, `n` and `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    gram: SymMatrix,
    rows: usize,
    row_bound: f64,
}

impl SecondMoment {
    pub fn new(gram: SymMatrix, rows: usize, row_bound: f64) -> Result<Self> {
        if gram.dim() < 2 {
            return Err(invalid!("second-moment matrix needs dimension >= 2"));
        }
        if rows == 0 {
            return Err(invalid!("second-moment matrix of an empty dataset"));
        }
        if !(row_bound > 0.0 && row_bound.is_finite()) {
            return Err(invalid!("row bound must be positive and finite, got {row_bound}"));
        }
        Ok(Self {
            gram,
            rows,
            row_bound,
        })
    }

    pub fn from_dataset(a: &Dataset) -> Self {
        Self {
            gram: gram(a),
            rows: a.rows(),
            row_bound: a.row_bound(),
        }
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.gram.dim()
    }

    pub fn row_bound(&self) -> f64 {
        self.row_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn clip_examples() {
        let a = clip_rows(vec![3.0, 4.0], 2, 10.0).unwrap();
        assert_eq!(a.row(0), &[3.0, 4.0]);

        let a = clip_rows(vec![3.0, 4.0], 2, 1.0).unwrap();
        assert!((a.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((a.row(0)[1] - 0.8).abs() < 1e-15);
        assert!((norm(a.row(0)) - 1.0).abs() < 1e-15);

        let a = clip_rows(vec![0.0, 0.0], 2, 0.1).unwrap();
        assert_eq!(a.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn clip_rejects_bad_input() {
        assert!(clip_rows(vec![f64::NAN, 1.0], 2, 1.0).is_err());
        assert!(clip_rows(vec![1.0, 1.0], 2, 0.0).is_err());
        assert!(clip_rows(vec![1.0, 1.0, 1.0], 3, -1.0).is_err());
        assert!(clip_rows(vec![1.0, 1.0, 1.0], 2, 1.0).is_err());
        assert!(clip_rows(vec![1.0], 1, 1.0).is_err());
    }

    #[test]
    fn new_enforces_row_bound() {
        assert!(Dataset::new(vec![3.0, 4.0], 2, 5.0).is_ok());
        assert!(Dataset::new(vec![3.0, 4.0], 2, 4.9).is_err());
    }

    #[test]
    fn gram_examples() {
        let id = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], 2, 1.0).unwrap();
        assert_eq!(gram(&id), SymMatrix::identity(2));

        let single = Dataset::new(vec![1.0, 2.0], 2, 3.0).unwrap();
        let g = gram(&single);
        assert_eq!(g.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.1, libm::exp(-9.0)).is_ok());
        assert!(PrivacyBudget::new(0.0, 0.01).is_err());
        assert!(PrivacyBudget::new(1.0, 0.5).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY, 0.01).is_err());
    }
}
