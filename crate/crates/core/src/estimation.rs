//! Instantaneous estimation error at age `τ` of the latest received sample.
//!
//! The receiver holds `y = x(ν) + w`, `w ~ N(0, q_w I)`, and estimates
//! `x̂(t) = F_τ y` with `τ = t − ν`. The error splits into a delay term
//! driven by the input noise since `ν` and a channel term driven by `w`:
//!
//! ```text
//! M^D(τ) = tr(Q_x − e^{Aτ} Q_x e^{Aᵀτ})
//! M^C(τ) = tr(e^{Aτ} Q_x (Q_x + Q_w)⁻¹ Q_w e^{Aᵀτ})
//! ```

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::process::ProcessModel;

/// Optimal linear gain `F_τ = e^{Aτ} Q_x (Q_x + q_w I)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorGain {
    pub tau: f64,
    pub f: Matrix,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid("tau", format!("must be finite and >= 0, got {tau}")));
    }
    Ok(())
}

fn check_q_w(q_w: f64) -> Result<()> {
    if !(q_w >= 0.0) || !q_w.is_finite() {
        return Err(Error::invalid("q_w", format!("must be finite and >= 0, got {q_w}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct ScalarTerms {
    a: f64,
    q_x: f64,
    h: f64,
}

/// `M^D` and `M^C` as functions of age for a fixed model and distortion
/// variance. The channel kernel `H = Q_x (Q_x + Q_w)⁻¹ Q_w` is factored once.
#[derive(Debug, Clone)]
pub struct MseProfile {
    a: Matrix,
    q_x: Matrix,
    h: Matrix,
    scalar: Option<ScalarTerms>,
}

impl MseProfile {
    pub fn new(model: &ProcessModel, q_w: f64) -> Result<Self> {
        check_q_w(q_w)?;
        let q_x = model.steady_covariance().clone();
        let h = if q_w == 0.0 {
            Matrix::zeros(model.dim(), model.dim())
        } else {
            q_x.add_diag(q_w).solve(&q_x)?.scale(q_w).symmetrize()
        };
        let scalar = model.as_scalar().map(|p| {
            let q_x = p.q_x();
            ScalarTerms {
                a: p.a(),
                q_x,
                h: q_x * q_w / (q_x + q_w),
            }
        });
        Ok(Self {
            a: model.system_matrix().clone(),
            q_x,
            h,
            scalar,
        })
    }

    /// `(M^D(τ), M^C(τ))`.
    pub fn components(&self, tau: f64) -> Result<(f64, f64)> {
        check_tau(tau)?;
        match self.scalar {
            Some(ScalarTerms { a, q_x, h }) => {
                let decay = (2.0 * a * tau).exp_m1();
                Ok((-q_x * decay, h * (decay + 1.0)))
            }
            None => self.components_trace(tau),
        }
    }

    fn components_trace(&self, tau: f64) -> Result<(f64, f64)> {
        let phi = linalg::mat_exp(&self.a, tau)?;
        let delay = self.q_x.trace() - phi.congruence(&self.q_x).trace();
        let channel = phi.congruence(&self.h).trace();
        Ok((delay.max(0.0), channel))
    }

    pub fn delay(&self, tau: f64) -> Result<f64> {
        self.components(tau).map(|c| c.0)
    }

    pub fn channel(&self, tau: f64) -> Result<f64> {
        self.components(tau).map(|c| c.1)
    }

    pub fn total(&self, tau: f64) -> Result<f64> {
        self.components(tau).map(|(d, c)| d + c)
    }
}

/// Delay component `M^D(τ)`.
pub fn mse_delay(model: &ProcessModel, tau: f64) -> Result<f64> {
    MseProfile::new(model, 0.0)?.delay(tau)
}

/// Channel component `M^C(τ)` under the optimal gain.
pub fn mse_channel(model: &ProcessModel, q_w: f64, tau: f64) -> Result<f64> {
    MseProfile::new(model, q_w)?.channel(tau)
}

/// `M(τ) = M^D(τ) + M^C(τ)`.
pub fn mse_total(model: &ProcessModel, q_w: f64, tau: f64) -> Result<f64> {
    MseProfile::new(model, q_w)?.total(tau)
}

pub fn estimator_gain(model: &ProcessModel, q_w: f64, tau: f64) -> Result<EstimatorGain> {
    check_q_w(q_w)?;
    check_tau(tau)?;
    let phi = linalg::mat_exp(model.system_matrix(), tau)?;
    let q_x = model.steady_covariance();
    // Fᵀ = (Q_x + q_w I)⁻¹ Q_x e^{Aᵀτ}
    let f = q_x.add_diag(q_w).solve(&q_x.matmul(&phi.transpose()))?.transpose();
    Ok(EstimatorGain { tau, f })
}

/// Channel component under an arbitrary gain `F`:
/// `tr((Φ − F) Q_x (Φ − F)ᵀ + q_w F Fᵀ)`.
pub fn mse_channel_with_gain(model: &ProcessModel, q_w: f64, tau: f64, f: &Matrix) -> Result<f64> {
    check_q_w(q_w)?;
    check_tau(tau)?;
    let k = model.dim();
    if f.rows() != k || f.cols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: if f.rows() != k { f.rows() } else { f.cols() },
        });
    }
    let phi = linalg::mat_exp(model.system_matrix(), tau)?;
    let bias = phi.sub(f).congruence(model.steady_covariance()).trace();
    let noise = f.matmul(&f.transpose()).trace() * q_w;
    Ok(bias + noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::quadrature;
    use crate::testutil::random_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn section_v() -> ProcessModel {
        ProcessModel::scalar(-0.02, 1.0).unwrap()
    }

    #[test]
    fn delay_examples() {
        let m = section_v();
        assert_eq!(mse_delay(&m, 0.0).unwrap(), 0.0);
        assert!((mse_delay(&m, 10.0).unwrap() - 8.241998849109017).abs() < 1e-12);
        assert!((mse_delay(&m, 1000.0).unwrap() - 25.0).abs() < 1e-4);
        assert!(mse_delay(&m, -1.0).is_err());
    }

    #[test]
    fn delay_matches_input_noise_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [section_v(), random_model(&mut rng, 2), random_model(&mut rng, 3)] {
            for &tau in &[0.3, 4.0, 25.0] {
                let q = quadrature(
                    |mu| {
                        linalg::mat_exp(m.system_matrix(), tau - mu)
                            .unwrap()
                            .congruence(m.input_covariance())
                            .trace()
                    },
                    0.0,
                    tau,
                    1e-12,
                )
                .unwrap();
                let v = mse_delay(&m, tau).unwrap();
                assert!((v - q).abs() < 1e-9 * (1.0 + q), "tau={tau}: {v} vs {q}");
            }
        }
    }

    #[test]
    fn channel_examples() {
        let m = section_v();
        assert_eq!(mse_channel(&m, 0.0, 3.0).unwrap(), 0.0);
        assert!((mse_channel(&m, 1.0, 0.0).unwrap() - 25.0 / 26.0).abs() < 1e-15);
        assert!((mse_channel(&m, 1.0, 10.0).unwrap() - 0.6445385058034993).abs() < 1e-14);
        assert!((mse_total(&m, 1.0, 10.0).unwrap() - 8.886537354912517).abs() < 1e-12);
        assert_eq!(mse_total(&m, 0.0, 0.0).unwrap(), 0.0);
        assert!(mse_channel(&m, -1.0, 0.0).is_err());
    }

    #[test]
    fn scalar_fast_path_matches_trace_path() {
        for (a, q_u) in [(-0.02, 1.0), (-0.5, 3.0)] {
            let m = ProcessModel::scalar(a, q_u).unwrap();
            for &q_w in &[0.0, 1.0, 25.0] {
                let p = MseProfile::new(&m, q_w).unwrap();
                for &tau in &[0.0, 1.0, 10.0, 100.0] {
                    let (d1, c1) = p.components(tau).unwrap();
                    let (d2, c2) = p.components_trace(tau).unwrap();
                    assert!((d1 - d2).abs() <= 1e-12 * (1.0 + d1.abs()));
                    assert!((c1 - c2).abs() <= 1e-12 * (1.0 + c1.abs()));
                }
            }
        }
    }

    #[test]
    fn gain_examples() {
        let m = section_v();
        let g = estimator_gain(&m, 0.0, 7.0).unwrap();
        assert!((g.f[(0, 0)] - (-0.14f64).exp()).abs() < 1e-15);
        let g = estimator_gain(&m, 25.0, 0.0).unwrap();
        assert!((g.f[(0, 0)] - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 3);
        let g = estimator_gain(&m, 0.0, 2.0).unwrap();
        let phi = linalg::mat_exp(m.system_matrix(), 2.0).unwrap();
        assert!(g.f.sub(&phi).max_abs() < 1e-12);
        assert!(estimator_gain(&m, 1e12, 0.0).unwrap().f.max_abs() < 1e-10);
    }

    #[test]
    fn optimal_gain_attains_closed_form_and_is_local_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [1, 2, 3] {
            let m = if k == 1 { section_v() } else { random_model(&mut rng, k) };
            for &(tau, q_w) in &[(0.0, 1.0), (2.0, 0.3), (15.0, 5.0)] {
                let g = estimator_gain(&m, q_w, tau).unwrap();
                let at = mse_channel_with_gain(&m, q_w, tau, &g.f).unwrap();
                let want = mse_channel(&m, q_w, tau).unwrap();
                assert!((at - want).abs() < 1e-12 * (1.0 + want));
                for _ in 0..50 {
                    let mut d = Matrix::zeros(k, k);
                    for i in 0..k {
                        for j in 0..k {
                            d[(i, j)] = rng.random_range(-1.0..1.0);
                        }
                    }
                    let d = d.scale(1e-3 / d.frobenius_norm());
                    let v = mse_channel_with_gain(&m, q_w, tau, &g.f.add(&d)).unwrap();
                    assert!(v >= at - 1e-12);
                }
            }
        }
    }

    #[test]
    fn components_monotone_in_age() {
        let p = MseProfile::new(&section_v(), 2.0).unwrap();
        let c0 = p.channel(0.0).unwrap();
        let (mut pd, mut pc) = (0.0, f64::INFINITY);
        for i in 0..300 {
            let (d, c) = p.components(i as f64 * 0.5).unwrap();
            assert!(d >= pd && c <= pc && c <= c0);
            (pd, pc) = (d, c);
        }
    }
}
