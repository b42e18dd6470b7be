//! Link timing: per-attempt delay `r = αn + β` and the geometric number of
//! retransmissions before an ACK. A cycle is `s` seconds of waiting
//! followed by `r′ = (m + 1) r`, `P{m = j} = εʲ(1 − ε)`.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};

/// Timing parameters of the link. `s` is the fixed wait after each ACK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTiming {
    alpha: f64,
    beta: f64,
    s: f64,
}

impl Default for LinkTiming {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            s: 0.0,
        }
    }
}

impl LinkTiming {
    pub fn new(alpha: f64, beta: f64, s: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", format!("must be finite and positive, got {alpha}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
        }
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::invalid("s", format!("must be finite and >= 0, got {s}")));
        }
        Ok(Self { alpha, beta, s })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn wait(&self) -> f64 {
        self.s
    }

    /// Per-attempt delay for blocklength `n`.
    pub fn attempt_delay(&self, n: f64) -> Result<f64> {
        attempt_delay(self.alpha, self.beta, n)
    }
}

/// `r = αn + β`.
pub fn attempt_delay(alpha: f64, beta: f64, n: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha", format!("must be finite and positive, got {alpha}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::invalid("n", format!("must be finite and positive, got {n}")));
    }
    Ok(alpha * n + beta)
}

fn check(r: f64, eps: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("r", format!("must be finite and positive, got {r}")));
    }
    if eps >= 1.0 {
        return Err(Error::NeverSucceeds(eps));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid("eps", format!("must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

/// `(E[r′], E[r′²]) = (r/(1−ε), (1+ε) r²/(1−ε)²)`.
pub fn success_delay_moments(r: f64, eps: f64) -> Result<(f64, f64)> {
    check(r, eps)?;
    let g = 1.0 - eps;
    Ok((r / g, (1.0 + eps) * r * r / (g * g)))
}

/// Draws `r′ = (m + 1) r`.
///
/// # Panics
/// If `r` or `eps` violate the preconditions of [`success_delay_moments`].
pub fn sample_success_delay<R: Rng + ?Sized>(r: f64, eps: f64, rng: &mut R) -> f64 {
    sample_retransmissions(eps, rng) as f64 * r + r
}

/// Draws the number of failed attempts `m` before an ACK.
pub fn sample_retransmissions<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> u64 {
    check(1.0, eps).expect("eps must lie in [0, 1)");
    if eps == 0.0 {
        return 0;
    }
    Geometric::new(1.0 - eps).expect("success probability in (0, 1]").sample(rng)
}
