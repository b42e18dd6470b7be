//! The monitored Gauss-Markov process `ẋ = A x + u`, `u ~ N(0, Q_u)` white.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, MAX_DIM};

/// Linear time-invariant process with a Hurwitz system matrix.
///
/// The steady-state covariance `Q_x` (the solution of
/// `A Q_x + Q_x Aᵀ + Q_u = 0`) is computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    a: Matrix,
    q_u: Matrix,
    q_x: Matrix,
}

impl ProcessModel {
    pub fn new(a: Matrix, q_u: Matrix) -> Result<Self> {
        let k = a.ensure_square()?;
        if k > MAX_DIM {
            return Err(Error::TooLarge(k));
        }
        if q_u.ensure_square()? != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: q_u.rows(),
            });
        }
        if !q_u.is_symmetric(1e-12) {
            return Err(Error::invalid("q_u", "must be symmetric"));
        }
        let min_eig = linalg::symmetric_eigenvalues(&q_u)[0];
        if min_eig < -1e-12 * q_u.max_abs().max(1.0) {
            return Err(Error::invalid(
                "q_u",
                format!("must be positive semidefinite (min eigenvalue {min_eig:e})"),
            ));
        }
        let q_x = linalg::lyapunov_solve(&a, &q_u)?;
        Ok(Self { a, q_u, q_x })
    }

    /// One-dimensional process `ẋ = a x + u` with `a < 0`, `q_u > 0`.
    pub fn scalar(a: f64, q_u: f64) -> Result<Self> {
        ScalarProcess::new(a, q_u).map(Self::from)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn system_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn input_covariance(&self) -> &Matrix {
        &self.q_u
    }

    /// Steady-state covariance `Q_x = lim E[x xᵀ]`.
    pub fn steady_covariance(&self) -> &Matrix {
        &self.q_x
    }

    /// The scalar view, when `k = 1`.
    pub fn as_scalar(&self) -> Option<ScalarProcess> {
        match (self.a.as_scalar(), self.q_u.as_scalar()) {
            (Some(a), Some(q_u)) => ScalarProcess::new(a, q_u).ok(),
            _ => None,
        }
    }

    /// Exact discretisation over a step `h`: `x(t+h) = Φ x(t) + v`,
    /// `v ~ N(0, Σ)`, with `Φ = e^{Ah}` and `Σ = Q_x − Φ Q_x Φᵀ`.
    pub fn transition(&self, h: f64) -> Result<(Matrix, Matrix)> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", format!("must be finite and >= 0, got {h}")));
        }
        let k = self.dim();
        if h == 0.0 {
            return Ok((Matrix::identity(k), Matrix::zeros(k, k)));
        }
        if let (Some(a), Some(q_x)) = (self.a.as_scalar(), self.q_x.as_scalar()) {
            // expm1 avoids the cancellation in q_x (1 - e^{2ah}) for small h
            let phi = (a * h).exp();
            let sigma = -q_x * (2.0 * a * h).exp_m1();
            return Ok((Matrix::scalar(phi), Matrix::scalar(sigma)));
        }
        let phi = linalg::mat_exp(&self.a, h)?;
        let sigma = self.q_x.sub(&phi.congruence(&self.q_x)).symmetrize();
        Ok((phi, sigma))
    }
}

impl From<ScalarProcess> for ProcessModel {
    fn from(p: ScalarProcess) -> Self {
        Self {
            a: Matrix::scalar(p.a),
            q_u: Matrix::scalar(p.q_u),
            q_x: Matrix::scalar(p.q_x()),
        }
    }
}

/// Scalar process parameters, used by the closed-form metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarProcess {
    a: f64,
    q_u: f64,
}

impl ScalarProcess {
    pub fn new(a: f64, q_u: f64) -> Result<Self> {
        if !(a < 0.0) || !a.is_finite() {
            return Err(Error::invalid(
                "a",
                format!("must be finite and negative (stable), got {a}"),
            ));
        }
        if !(q_u > 0.0) || !q_u.is_finite() {
            return Err(Error::invalid("q_u", format!("must be finite and positive, got {q_u}")));
        }
        Ok(Self { a, q_u })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn q_u(&self) -> f64 {
        self.q_u
    }

    /// `q_x = −q_u / (2a)`.
    pub fn q_x(&self) -> f64 {
        -self.q_u / (2.0 * self.a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::quadrature;
    use crate::testutil::random_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_steady_state() {
        let m = ProcessModel::scalar(-0.02, 1.0).unwrap();
        assert!((m.steady_covariance()[(0, 0)] - 25.0).abs() < 1e-12);
        assert_eq!(m.as_scalar().unwrap().q_x(), 25.0);
        let m = ProcessModel::new(Matrix::identity(2).scale(-1.0), Matrix::identity(2)).unwrap();
        let qx = m.steady_covariance();
        assert!(qx.sub(&Matrix::identity(2).scale(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn rejects_unstable_and_bad_noise() {
        assert!(ProcessModel::scalar(0.0, 1.0).is_err());
        assert!(ProcessModel::scalar(0.3, 1.0).is_err());
        assert!(ProcessModel::scalar(-0.3, 0.0).is_err());
        let a = Matrix::from_rows(&[&[-1.0, 0.0], &[0.0, 0.2]]).unwrap();
        assert_eq!(
            ProcessModel::new(a, Matrix::identity(2)),
            Err(Error::UnstableSystem)
        );
        let q = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(ProcessModel::new(Matrix::identity(2).scale(-1.0), q).is_err());
        let q = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
        assert!(ProcessModel::new(Matrix::identity(2).scale(-1.0), q).is_err());
    }

    #[test]
    fn transition_examples() {
        let m = ProcessModel::scalar(-0.02, 1.0).unwrap();
        let (phi, sigma) = m.transition(0.0).unwrap();
        assert_eq!(phi, Matrix::identity(1));
        assert_eq!(sigma, Matrix::zeros(1, 1));
        let (phi, sigma) = m.transition(10.0).unwrap();
        assert!((phi[(0, 0)] - 0.8187307530779818).abs() < 1e-15);
        assert!((sigma[(0, 0)] - 8.241998849109017).abs() < 1e-12);
        assert!(m.transition(-1.0).is_err());
        // saturation: ‖e^{Ah}‖ < 1e-6 needs h > ln(1e6)/0.02 ≈ 691
        let (phi, sigma) = m.transition(800.0).unwrap();
        assert!(phi.max_abs() < 1e-6);
        assert!((sigma[(0, 0)] - 25.0).abs() < 1e-8);
    }

    fn sigma_by_quadrature(m: &ProcessModel, h: f64) -> Matrix {
        let k = m.dim();
        let mut out = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = quadrature(
                    |mu| {
                        let e = linalg::mat_exp(m.system_matrix(), h - mu).unwrap();
                        e.congruence(m.input_covariance())[(i, j)]
                    },
                    0.0,
                    h,
                    1e-12,
                )
                .unwrap();
            }
        }
        out
    }

    #[test]
    fn sigma_matches_quadrature_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in [2, 3] {
            for _ in 0..3 {
                let m = random_model(&mut rng, k);
                for &h in &[0.1, 1.0, 7.5] {
                    let (_, sigma) = m.transition(h).unwrap();
                    let q = sigma_by_quadrature(&m, h);
                    assert!(sigma.sub(&q).max_abs() < 1e-9, "k={k} h={h}");
                    assert!(linalg::symmetric_eigenvalues(&sigma)[0] >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn steady_state_is_fixed_point_of_discrete_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_model(&mut rng, 3);
        let (phi, sigma) = m.transition(0.5).unwrap();
        let mut p = Matrix::zeros(3, 3);
        for _ in 0..5000 {
            p = phi.congruence(&p).add(&sigma);
        }
        assert!(p.sub(m.steady_covariance()).max_abs() < 1e-9);
    }

    #[test]
    fn scalar_sigma_nondecreasing() {
        let m = ProcessModel::scalar(-0.3, 2.0).unwrap();
        let mut prev = 0.0;
        for i in 0..200 {
            let s = m.transition(i as f64 * 0.1).unwrap().1[(0, 0)];
            assert!(s >= prev);
            prev = s;
        }
    }
}
