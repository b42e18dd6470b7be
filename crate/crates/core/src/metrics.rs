//! Long-run averages of estimation error and age.
//!
//! A cycle starts at a successful reception, where the age equals `r`.
//! It lasts `s + r′` with `r′ = (m + 1) r`, over which the age runs from `r`
//! to `r + s + r′`. By renewal-reward, each average is the expected
//! per-cycle integral divided by `E[s + r′] = s + r/(1 − ε)`.

use crate::coding::{self, ChannelSpec, SourceVarMode};
use crate::error::{Error, Result};
use crate::estimation::MseProfile;
use crate::linalg::quadrature;
use crate::process::{ProcessModel, ScalarProcess};
use crate::timing::{self, LinkTiming};

/// Default tolerance of [`avg_mse_general`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// Series length cap of [`avg_mse_general`].
pub const MAX_TERMS: usize = 1_000_000;

/// Constants of the scalar closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormTerms {
    /// `Ξ = q_x`.
    pub xi: f64,
    /// `Υ = q_u/(2a) + q_x q_w/(q_x + q_w)`.
    pub upsilon: f64,
}

impl ClosedFormTerms {
    pub fn new(p: &ScalarProcess, q_w: f64) -> Result<Self> {
        check_q_w(q_w)?;
        let q_x = p.q_x();
        Ok(Self {
            xi: q_x,
            upsilon: p.q_u() / (2.0 * p.a()) + harmonic(q_x, q_w),
        })
    }
}

/// `q_x q_w / (q_x + q_w)`, zero at `q_w = 0`.
fn harmonic(q_x: f64, q_w: f64) -> f64 {
    if q_w == 0.0 {
        0.0
    } else {
        q_x * q_w / (q_x + q_w)
    }
}

/// Time-average MSE with its delay and channel parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseAverages {
    pub mse: f64,
    pub mse_delay_avg: f64,
    pub mse_channel_avg: f64,
}

/// All long-run averages of one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMetrics {
    pub mse: f64,
    pub aoi: f64,
    pub mse_delay_avg: f64,
    pub mse_channel_avg: f64,
}

fn check_cycle(r: f64, s: f64, eps: f64) -> Result<()> {
    timing::success_delay_moments(r, eps)?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid("s", format!("must be finite and >= 0, got {s}")));
    }
    Ok(())
}

fn check_q_w(q_w: f64) -> Result<()> {
    if !(q_w >= 0.0) || !q_w.is_finite() {
        return Err(Error::invalid("q_w", format!("must be finite and >= 0, got {q_w}")));
    }
    Ok(())
}

/// Mean cycle length `E[s + r′]`.
fn mean_cycle(r: f64, s: f64, eps: f64) -> f64 {
    r / (1.0 - eps) + s
}

/// Scalar closed form.
///
/// With `G = [((1−ε)/(1−εe^{2ar})) e^{2a(2r+s)} − e^{2ar}] / E[s + r′]`,
/// `MSE = Ξ + Υ G/(2a)`, split as `MSE^D = Ξ − Ξ G/(2a)` and
/// `MSE^C = q_x q_w/(q_x + q_w) · G/(2a)`.
pub fn avg_mse_scalar(p: &ScalarProcess, q_w: f64, r: f64, s: f64, eps: f64) -> Result<MseAverages> {
    check_cycle(r, s, eps)?;
    let terms = ClosedFormTerms::new(p, q_w)?;
    let a = p.a();
    let x = (2.0 * a * (r + s)).exp_m1();
    let y = (2.0 * a * r).exp_m1();
    // bracket = e^{2ar} [(1−ε) e^{2a(r+s)} / (1 − ε e^{2ar}) − 1], rearranged
    // so that the small-r cancellation happens inside expm1
    let bracket = (y + 1.0) * ((1.0 - eps) * x + eps * y) / (1.0 - eps - eps * y);
    let g = bracket / mean_cycle(r, s, eps) / (2.0 * a);
    let delay = terms.xi - terms.xi * g;
    let channel = harmonic(terms.xi, q_w) * g;
    Ok(MseAverages {
        mse: delay + channel,
        mse_delay_avg: delay,
        mse_channel_avg: channel,
    })
}

/// Time-average age of information,
/// `E[(s + r′) r + ½(s + r′)²] / E[s + r′]`, i.e.
///
/// ```text
/// [½(1−ε)s² + (2−ε)sr + ((3−ε)/(2(1−ε)))r²] / ((1−ε)s + r)
/// ```
pub fn avg_aoi(r: f64, s: f64, eps: f64) -> Result<f64> {
    check_cycle(r, s, eps)?;
    let g = 1.0 - eps;
    let num = 0.5 * g * s * s + (2.0 - eps) * s * r + (3.0 - eps) / (2.0 * g) * r * r;
    Ok(num / (g * s + r))
}

/// Numeric time-average MSE for any dimension.
///
/// The per-cycle integral `∫_r^{r+s+r′} M(τ) dτ` is split into a head
/// `[r, 2r+s]` and slabs `[r+s+jr, r+s+(j+1)r]`, `j ≥ 1`; slab `j` is
/// traversed with probability `P{m ≥ j} = εʲ`, so
/// `E[L] = Σ_j εʲ S_j`. Each slab is integrated adaptively and the series
/// stops once the remaining tail is provably below the tolerance.
///
/// `tol` bounds the relative error of `mse`; component errors are bounded by
/// `tol · mse` in absolute terms.
pub fn avg_mse_general(
    model: &ProcessModel,
    q_w: f64,
    r: f64,
    s: f64,
    eps: f64,
    tol: f64,
) -> Result<MseAverages> {
    check_cycle(r, s, eps)?;
    check_q_w(q_w)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let profile = MseProfile::new(model, q_w)?;
    // E[L] ≥ head integral ≥ (r + s) M^D(r) since M^D is nondecreasing; a
    // coarse pilot of the head covers the case of negligible input noise.
    // M(τ) ≤ tr Q_x since the optimal gain does no worse than x̂ = 0.
    let m_max = model.steady_covariance().trace();
    let pilot = quadrature(|t| profile.total(t).unwrap_or(f64::NAN), r, 2.0 * r + s, 1e-3 * (r + s) * m_max)?;
    let head_floor = ((r + s) * profile.delay(r)?).max(0.5 * pilot);
    let budget = 0.5 * tol * head_floor;
    let slab_tol = budget * (1.0 - eps);

    let integrate = |lo: f64, hi: f64| -> Result<(f64, f64)> {
        let delay = quadrature(|t| profile.delay(t).unwrap_or(f64::NAN), lo, hi, 0.5 * slab_tol)?;
        let channel = quadrature(|t| profile.channel(t).unwrap_or(f64::NAN), lo, hi, 0.5 * slab_tol)?;
        Ok((delay, channel))
    };

    let (mut delay, mut channel) = integrate(r, 2.0 * r + s)?;
    let mut weight = eps;
    let mut terms = 1usize;
    // weight · r · m_max / (1 − ε) bounds the remaining tail.
    while weight * r * m_max / (1.0 - eps) > budget {
        if terms >= MAX_TERMS {
            return Err(Error::SeriesFailure(terms));
        }
        let lo = r + s + terms as f64 * r;
        let (sd, sc) = integrate(lo, lo + r)?;
        delay += weight * sd;
        channel += weight * sc;
        weight *= eps;
        terms += 1;
    }
    let cycle = mean_cycle(r, s, eps);
    let (delay, channel) = (delay / cycle, channel / cycle);
    Ok(MseAverages {
        mse: delay + channel,
        mse_delay_avg: delay,
        mse_channel_avg: channel,
    })
}

/// How the distortion variance `q_w` is chosen for a cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum QwMode {
    /// `q_w = d`.
    #[default]
    WorstCase,
    /// Fixed `q_w`, which must not exceed `d`.
    Explicit(f64),
}

impl QwMode {
    pub fn resolve(&self, d: f64) -> Result<f64> {
        match *self {
            QwMode::WorstCase => Ok(d),
            QwMode::Explicit(q_w) => {
                check_q_w(q_w)?;
                if q_w > d {
                    return Err(Error::invalid("q_w", format!("must not exceed d = {d}, got {q_w}")));
                }
                Ok(q_w)
            }
        }
    }
}

/// Knobs of [`evaluate_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub q_w: QwMode,
    pub source_var: SourceVarMode,
    /// Round the blocklength up to a whole number of channel uses.
    pub integer_blocklength: bool,
    /// Tolerance of the numeric route (`k > 1`).
    pub tol: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            q_w: QwMode::WorstCase,
            source_var: SourceVarMode::SteadyState,
            integer_blocklength: false,
            tol: DEFAULT_TOL,
        }
    }
}

/// One `(d, ε)` cell of the trade-off. Infeasible cells carry `NaN` in every
/// derived field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub d: f64,
    pub eps: f64,
    pub n: f64,
    pub r: f64,
    pub aoi: f64,
    pub mse: f64,
    pub mse_delay_avg: f64,
    pub mse_channel_avg: f64,
    pub feasible: bool,
}

impl TradeoffPoint {
    pub fn infeasible(d: f64, eps: f64) -> Self {
        Self {
            d,
            eps,
            n: f64::NAN,
            r: f64::NAN,
            aoi: f64::NAN,
            mse: f64::NAN,
            mse_delay_avg: f64::NAN,
            mse_channel_avg: f64::NAN,
            feasible: false,
        }
    }

    pub fn metrics(&self) -> CycleMetrics {
        CycleMetrics {
            mse: self.mse,
            aoi: self.aoi,
            mse_delay_avg: self.mse_delay_avg,
            mse_channel_avg: self.mse_channel_avg,
        }
    }
}

/// Full pipeline `(d, ε) → n → r → (MSE, AoI)`: the closed form for scalar
/// processes, the numeric series otherwise.
pub fn evaluate_point(
    model: &ProcessModel,
    channel: &ChannelSpec,
    link: &LinkTiming,
    d: f64,
    eps: f64,
    opts: &EvalOptions,
) -> Result<TradeoffPoint> {
    let q_w = opts.q_w.resolve(d)?;
    let cp = coding::make_coding_point(model, channel, d, eps, opts.source_var, q_w)?;
    let n = if opts.integer_blocklength { cp.n.ceil() } else { cp.n };
    let r = link.attempt_delay(n)?;
    let s = link.wait();
    let aoi = avg_aoi(r, s, eps)?;
    let avg = match model.as_scalar() {
        Some(p) => avg_mse_scalar(&p, q_w, r, s, eps)?,
        None => avg_mse_general(model, q_w, r, s, eps, opts.tol)?,
    };
    Ok(TradeoffPoint {
        d,
        eps,
        n,
        r,
        aoi,
        mse: avg.mse,
        mse_delay_avg: avg.mse_delay_avg,
        mse_channel_avg: avg.mse_channel_avg,
        feasible: true,
    })
}
