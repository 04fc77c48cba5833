//! Least-squares coefficients from (noisy) second-moment matrices, and exact baselines.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::linalg::{cholesky, gram_of, Matrix, SymMatrix};

/// Relative pivot floor for every solve in this module.
pub const SOLVE_PIVOT_FLOOR: f64 = 1e-12;

/// One column as the label, an ordered subset of the others as features.
///
/// An intercept is just another feature: the all-ones column of the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressionTask {
    label: usize,
    features: Vec<usize>,
}

impl RegressionTask {
    /// Validates the indices against a `dim`-column matrix.
    pub fn new(label: usize, features: Vec<usize>, dim: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(invalid!("a regression task needs at least one feature"));
        }
        if label >= dim {
            return Err(invalid!("label index {label} out of range for {dim} columns"));
        }
        for (i, &f) in features.iter().enumerate() {
            if f >= dim {
                return Err(invalid!("feature index {f} out of range for {dim} columns"));
            }
            if f == label {
                return Err(invalid!("label {label} is also listed as a feature"));
            }
            if features[..i].contains(&f) {
                return Err(invalid!("feature index {f} listed twice"));
            }
        }
        Ok(Self { label, features })
    }

    /// All columns but the last as features, the last as the label.
    pub fn last_column(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid!("need at least 2 columns"));
        }
        Self::new(dim - 1, (0..dim - 1).collect(), dim)
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }
}

/// Regression coefficients, one per feature in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(Vec<f64>);

impl Coefficients {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("coefficients must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Appends zeros up to `len` entries; coordinates with an explicit zero target.
    pub fn padded(&self, len: usize) -> Result<Self> {
        if len < self.0.len() {
            return Err(invalid!("cannot pad {} coefficients down to {len}", self.0.len()));
        }
        let mut values = self.0.clone();
        values.resize(len, 0.0);
        Ok(Self(values))
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }
}

fn solve_spd(m: &SymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let floor = SOLVE_PIVOT_FLOOR * m.max_diagonal().max(0.0);
    Ok(cholesky(m, floor)?.solve(rhs))
}

fn finite(values: Vec<f64>) -> Result<Coefficients> {
    Coefficients::new(values).map_err(|_| crate::Error::Numeric(alloc::string::String::from("non-finite solution")))
}

/// `argmin_{β : β_label = −1} βᵀMβ` restricted to the task's features,
/// i.e. `M[F,F]⁻¹ M[F,label]`.
pub fn solve_from_gram(m: &SymMatrix, task: &RegressionTask) -> Result<Coefficients> {
    let dim = m.dim();
    if task.label >= dim || task.features.iter().any(|&f| f >= dim) {
        return Err(invalid!("task indices out of range for a {dim}x{dim} matrix"));
    }
    let sub = m.principal(&task.features);
    let rhs = m.column_entries(&task.features, task.label);
    finite(solve_spd(&sub, &rhs)?)
}

fn normal_equations(x: &Matrix, y: &[f64], ridge: f64) -> Result<Coefficients> {
    if x.nrows() != y.len() {
        return Err(invalid!("X has {} rows but y has {} entries", x.nrows(), y.len()));
    }
    let xtx = gram_of(x).shifted(ridge);
    let xty: Vec<f64> = (0..x.ncols())
        .map(|j| x.column(j).iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    finite(solve_spd(&xtx, &xty)?)
}

/// Ordinary least squares `(XᵀX)⁻¹Xᵀy`.
pub fn ols(x: &Matrix, y: &[f64]) -> Result<Coefficients> {
    normal_equations(x, y, 0.0)
}

/// Ridge regression `(XᵀX + w²I)⁻¹Xᵀy`, the minimizer of `‖Xβ − y‖² + w²‖β‖²`.
pub fn ridge_closed_form(x: &Matrix, y: &[f64], w: f64) -> Result<Coefficients> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(invalid!("ridge width must be non-negative, got {w}"));
    }
    normal_equations(x, y, w * w)
}

/// Euclidean distance; lengths must match (pad the truth explicitly first).
pub fn l2_error(estimate: &Coefficients, truth: &Coefficients) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(invalid!(
            "coefficient lengths differ: {} vs {}",
            estimate.len(),
            truth.len()
        ));
    }
    Ok(libm::sqrt(
        estimate.0.iter().zip(&truth.0).map(|(a, b)| (a - b) * (a - b)).sum(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn task_validation() {
        assert!(RegressionTask::new(2, vec![0, 1], 3).is_ok());
        assert!(RegressionTask::new(1, vec![0, 1], 3).is_err());
        assert!(RegressionTask::new(2, vec![0, 0], 3).is_err());
        assert!(RegressionTask::new(3, vec![0], 3).is_err());
        assert!(RegressionTask::new(2, vec![], 3).is_err());
    }

    #[test]
    fn identity_gives_zero() {
        let task = RegressionTask::last_column(3).unwrap();
        let beta = solve_from_gram(&SymMatrix::identity(3), &task).unwrap();
        assert_eq!(beta.values(), &[0.0, 0.0]);
    }

    #[test]
    fn two_by_two_example() {
        // minimize 2b² − 2b + 3
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let task = RegressionTask::new(1, vec![0], 2).unwrap();
        assert!((solve_from_gram(&m, &task).unwrap().values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singular_features_error() {
        let m = SymMatrix::diagonal_from(&[1.0, 0.0, 1.0]);
        let task = RegressionTask::last_column(3).unwrap();
        assert!(matches!(solve_from_gram(&m, &task), Err(crate::Error::Singular { .. })));
    }

    #[test]
    fn ridge_example() {
        let x = Matrix::identity(2, 2);
        let beta = ridge_closed_form(&x, &[2.0, 4.0], 1.0).unwrap();
        assert!((beta.values()[0] - 1.0).abs() < 1e-15 && (beta.values()[1] - 2.0).abs() < 1e-15);
        assert_eq!(ols(&x, &[2.0, 4.0]).unwrap().values(), &[2.0, 4.0]);
    }

    #[test]
    fn l2_examples() {
        let a = Coefficients::new(vec![1.0, 0.0]).unwrap();
        let b = Coefficients::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        assert!((l2_error(&a, &b).unwrap() - libm::sqrt(2.0)).abs() < 1e-15);
        let short = Coefficients::new(vec![2.0]).unwrap();
        assert!(l2_error(&a, &short).is_err());
        assert_eq!(l2_error(&a, &short.padded(2).unwrap()).unwrap(), 1.0);
    }
}
