//! Shared fixtures for unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::process::ProcessModel;

/// Random stable `k`-dimensional model: diagonally dominant negative `A`,
/// positive-definite `Q_u`.
pub fn random_model(rng: &mut ChaCha8Rng, k: usize) -> ProcessModel {
    let mut a = Matrix::zeros(k, k);
    let mut b = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = rng.random_range(-0.5..0.5);
            b[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let bound = (0..k)
        .map(|i| (0..k).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let a = a.add_diag(-bound - 0.05);
    let q_u = b.matmul(&b.transpose()).add_diag(0.1);
    ProcessModel::new(a, q_u).unwrap()
}
