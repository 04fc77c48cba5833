#![allow(dead_code)]

use gramdp::linalg::{Matrix, SymMatrix};
use gramdp::{Dataset, RngStream};

/// `‖a − b‖_F / ‖b‖_F`.
pub fn rel_frobenius(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

/// Running mean of symmetric matrices.
pub struct MeanAcc {
    sum: Option<SymMatrix>,
    count: usize,
}

impl MeanAcc {
    pub fn new() -> Self {
        Self { sum: None, count: 0 }
    }

    pub fn push(&mut self, m: &SymMatrix) {
        self.sum = Some(match self.sum.take() {
            Some(s) => s.add(m).unwrap(),
            None => m.clone(),
        });
        self.count += 1;
    }

    pub fn mean(&self) -> SymMatrix {
        self.sum.as_ref().unwrap().scaled(1.0 / self.count as f64)
    }
}

/// `n × d` dataset of bounded Gaussian rows.
pub fn gaussian_dataset(seed: u64, n: usize, d: usize, row_bound: f64) -> Dataset {
    let mut rng = RngStream::from_seed(seed);
    let x = gramdp::sampling::sample_gaussian_matrix(&mut rng, n, d, 1.0);
    let data: Vec<f64> = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| x[(i, j)]).collect();
    gramdp::clip_rows(data, d, row_bound).unwrap()
}

/// Plain dense `AᵀA` for comparison.
pub fn dense_gram(a: &Dataset) -> Matrix {
    let m = Matrix::from_row_slice(a.rows(), a.cols(), a.data());
    m.transpose() * m
}
