//! Finite-blocklength joint source-channel coding of a Gaussian source over
//! an AWGN channel, in the normal approximation
//!
//! ```text
//! n C − k R(d) = √(n V_C + k V_S) · Q⁻¹(ε)
//! ```
//!
//! where `k` source symbols are mapped to `n` channel uses and `ε` is the
//! probability that the decoded distortion exceeds `d`.

use std::f64::consts::{LN_2, SQRT_2};

use libm::erfc;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::process::ProcessModel;

/// AWGN channel with linear SNR `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    snr: f64,
}

impl ChannelSpec {
    pub fn new(snr: f64) -> Result<Self> {
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(Error::invalid("snr", format!("must be finite and positive, got {snr}")));
        }
        Ok(Self { snr })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }
}

fn check_snr(p: f64) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::invalid("snr", format!("must be finite and >= 0, got {p}")));
    }
    Ok(())
}

/// AWGN capacity `½ log₂(1 + P)` in bits per channel use.
pub fn capacity(p: f64) -> Result<f64> {
    check_snr(p)?;
    Ok(0.5 * p.ln_1p() / LN_2)
}

/// Gaussian rate-distortion function by reverse water-filling at a common
/// level `d`: `(1/k) Σ max(½ log₂(λᵢ / d), 0)` bits per source symbol.
pub fn rate_distortion(eigs: &[f64], d: f64) -> Result<f64> {
    if eigs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid("d", format!("must be finite and positive, got {d}")));
    }
    if let Some(bad) = eigs.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("eigs", format!("eigenvalue {bad} is negative or not finite")));
    }
    let total: f64 = eigs
        .iter()
        .map(|&l| if l > d { 0.5 * (l / d).log2() } else { 0.0 })
        .sum();
    Ok(total / eigs.len() as f64)
}

/// Channel and source dispersions `(V_C, V_S)` in bits².
pub fn dispersions(p: f64) -> Result<(f64, f64)> {
    check_snr(p)?;
    let log2e_sq = std::f64::consts::LOG2_E * std::f64::consts::LOG2_E;
    let v_s = 0.5 * log2e_sq;
    let g = 1.0 / (1.0 + p);
    let v_c = 0.5 * (1.0 - g * g) * log2e_sq;
    Ok((v_c, v_s))
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of [`q_func`] on `(0, 1)`.
pub fn q_inv(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("must lie strictly inside (0, 1), got {eps}")));
    }
    Ok(-normal_quantile(eps))
}

/// Standard normal quantile, Wichura's AS241 (PPND16).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Signed residual of the rate relation,
/// `n C − k R − √(n V_C + k V_S) · Q⁻¹(ε)`.
pub fn relation_residual(n: f64, k: usize, c: f64, r: f64, v_c: f64, v_s: f64, eps: f64) -> Result<f64> {
    let q = q_inv(eps)?;
    let kf = k as f64;
    Ok(n * c - kf * r - (n * v_c + kf * v_s).sqrt() * q)
}

/// Blocklength `n` solving the rate relation for given `(k, C, R, V_C, V_S, ε)`.
///
/// Squaring the relation gives a quadratic in `n` whose larger root is
/// returned. That root satisfies the relation itself only when
/// `Q⁻¹(ε) ≥ 0`; for `ε > 0.5` it is a code whose excess-distortion
/// probability is `1 − ε`, and [`Error::InfeasibleRoot`] is reported.
pub fn blocklength(k: usize, c: f64, r: f64, v_c: f64, v_s: f64, eps: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid("capacity", format!("must be finite and >= 0, got {c}")));
    }
    if c == 0.0 {
        return Err(Error::ZeroCapacity);
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid("rate", format!("must be finite and >= 0, got {r}")));
    }
    if !(v_c >= 0.0 && v_s >= 0.0) {
        return Err(Error::invalid("dispersion", "must be nonnegative"));
    }
    let q = q_inv(eps)?;
    let kf = k as f64;
    let q2 = q * q;
    let linear = v_c * q2 + 2.0 * kf * c * r;
    let delta = v_c * v_c * q2 * q2 + 4.0 * kf * (v_c * c * r + v_s * c * c) * q2;
    if delta < 0.0 {
        return Err(Error::InfeasibleRoot { eps });
    }
    let n = (linear + delta.sqrt()) / (2.0 * c * c);
    let residual = n * c - kf * r - (n * v_c + kf * v_s).sqrt() * q;
    if residual.abs() > RESIDUAL_TOL * (n * c).max(1.0) || !n.is_finite() {
        return Err(Error::InfeasibleRoot { eps });
    }
    Ok(n)
}

/// Relative tolerance on the rate-relation residual.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Which covariance feeds the rate-distortion eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceVarMode {
    /// Eigenvalues of the steady-state covariance `Q_x`.
    #[default]
    SteadyState,
    /// Eigenvalues of `Q_x + q_w I`, the covariance of the decoded sample.
    ReceiverOutput,
}

/// A fully derived coding operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingPoint {
    pub d: f64,
    pub eps: f64,
    pub k: usize,
    pub capacity: f64,
    pub rate: f64,
    pub v_c: f64,
    pub v_s: f64,
    pub n: f64,
}

impl CodingPoint {
    pub fn residual(&self) -> f64 {
        relation_residual(self.n, self.k, self.capacity, self.rate, self.v_c, self.v_s, self.eps)
            .expect("eps validated at construction")
    }
}

/// Source eigenvalues for the rate-distortion function.
pub fn source_eigenvalues(model: &ProcessModel, mode: SourceVarMode, q_w: f64) -> Vec<f64> {
    let q_x = model.steady_covariance();
    let cov: Matrix = match mode {
        SourceVarMode::SteadyState => q_x.clone(),
        SourceVarMode::ReceiverOutput => q_x.add_diag(q_w),
    };
    linalg::symmetric_eigenvalues(&cov)
}

/// Composes capacity, rate-distortion, dispersions and blocklength for one
/// `(d, ε)` cell. `q_w` is only read in [`SourceVarMode::ReceiverOutput`].
pub fn make_coding_point(
    model: &ProcessModel,
    channel: &ChannelSpec,
    d: f64,
    eps: f64,
    mode: SourceVarMode,
    q_w: f64,
) -> Result<CodingPoint> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid("d", format!("must be finite and positive, got {d}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("must lie strictly inside (0, 1), got {eps}")));
    }
    if mode == SourceVarMode::ReceiverOutput && !(q_w >= 0.0 && q_w.is_finite()) {
        return Err(Error::invalid("q_w", format!("must be finite and >= 0, got {q_w}")));
    }
    let eigs = source_eigenvalues(model, mode, q_w);
    let rate = rate_distortion(&eigs, d)?;
    if rate <= 0.0 {
        return Err(Error::ZeroRateCode { d });
    }
    let k = model.dim();
    let c = capacity(channel.snr())?;
    let (v_c, v_s) = dispersions(channel.snr())?;
    let n = blocklength(k, c, rate, v_c, v_s, eps)?;
    Ok(CodingPoint {
        d,
        eps,
        k,
        capacity: c,
        rate,
        v_c,
        v_s,
        n,
    })
}
