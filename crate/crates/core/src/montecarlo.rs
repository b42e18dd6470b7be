//! Sample-path simulation of the sampled link, used as an oracle for the
//! analytic averages.
//!
//! Each path starts at a success instant. The held sample is drawn from the
//! steady state at `−r`, so the process is stationary from the outset. A
//! cycle is a wait `s` followed by `m + 1` attempts of length `r`, with a
//! fresh sample taken at the start of every attempt; the last one is
//! delivered. The wait and every attempt are split into equal cells and the
//! squared error and age are integrated by the midpoint rule. The state
//! moves between cell boundaries and midpoints by exact transitions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::process::ProcessModel;
use crate::timing;

/// Cycles simulated and discarded at the start of every path.
pub const BURN_IN_CYCLES: usize = 10;

/// Default number of grid cells per attempt.
pub const CELLS_PER_ATTEMPT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: ProcessModel,
    pub q_w: f64,
    pub r: f64,
    pub s: f64,
    pub eps: f64,
    /// Cycles per path after burn-in.
    pub horizon_cycles: usize,
    pub paths: usize,
    pub seed: u64,
    /// Target cell width; at most `r / 10`.
    pub mse_grid_step: f64,
}

impl SimConfig {
    /// 200 paths of 500 cycles, seed 0, grid step `r / 50`.
    pub fn new(model: ProcessModel, q_w: f64, r: f64, s: f64, eps: f64) -> Self {
        Self {
            model,
            q_w,
            r,
            s,
            eps,
            horizon_cycles: 500,
            paths: 200,
            seed: 0,
            mse_grid_step: r / CELLS_PER_ATTEMPT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        timing::success_delay_moments(self.r, self.eps)?;
        if !(self.s >= 0.0) || !self.s.is_finite() {
            return Err(Error::invalid("s", format!("must be finite and >= 0, got {}", self.s)));
        }
        if !(self.q_w >= 0.0) || !self.q_w.is_finite() {
            return Err(Error::invalid("q_w", format!("must be finite and >= 0, got {}", self.q_w)));
        }
        if self.horizon_cycles == 0 {
            return Err(Error::invalid("horizon_cycles", "must be positive"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("paths", "must be positive"));
        }
        let step = self.mse_grid_step;
        if !(step > 0.0) || step > self.r / 10.0 * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "mse_grid_step",
                format!("must lie in (0, r/10] = (0, {}], got {step}", self.r / 10.0),
            ));
        }
        Ok(())
    }
}

/// Sample mean with its standard error; the error is absent for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: Option<f64>,
}

impl Estimate {
    /// Whether `value` lies within `z` standard errors of the mean.
    pub fn covers(&self, value: f64, z: f64) -> bool {
        match self.se {
            Some(se) => (self.mean - value).abs() <= z * se,
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub mse: Estimate,
    pub aoi: Estimate,
    pub mse_delay: Estimate,
    pub mse_channel: Estimate,
    pub cycles_observed: u64,
}

/// Conditional mean squared error over ages in `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeBin {
    pub lo: f64,
    pub hi: f64,
    /// Time-weighted mean age inside the bin.
    pub tau_mean: f64,
    pub mse: Estimate,
    /// Total simulated time spent in the bin.
    pub time: f64,
}

/// Pooled ratio `Σ num / Σ den` over paths, with the delta-method standard
/// error across paths.
fn ratio(num: &[f64], den: &[f64]) -> Estimate {
    let p = num.len();
    let total: f64 = den.iter().sum();
    let mean = num.iter().sum::<f64>() / total;
    let se = (p > 1).then(|| {
        let dbar = total / p as f64;
        let ss: f64 = num.iter().zip(den).map(|(a, t)| (a - mean * t).powi(2)).sum();
        (ss / (p * (p - 1)) as f64).sqrt() / dbar
    });
    Estimate { mean, se }
}

/// Exact transition over a fixed step, with the noise factor `Σ^{1/2}`.
struct Step {
    phi: Matrix,
    sqrt: Matrix,
}

impl Step {
    fn new(model: &ProcessModel, h: f64) -> Result<Self> {
        let (phi, sigma) = model.transition(h)?;
        Ok(Self {
            phi,
            sqrt: linalg::psd_sqrt(&sigma),
        })
    }
}

fn mul_into(m: &Matrix, x: &[f64], out: &mut [f64]) {
    let k = x.len();
    let a = m.as_slice();
    for i in 0..k {
        out[i] = a[i * k..(i + 1) * k].iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

struct Workspace {
    buf: Vec<f64>,
    z: Vec<f64>,
}

impl Workspace {
    fn new(k: usize) -> Self {
        Self {
            buf: vec![0.0; k],
            z: vec![0.0; k],
        }
    }

    /// `x ← Φ x + Σ^{1/2} ξ`, `ξ ~ N(0, I)`.
    fn advance(&mut self, step: &Step, x: &mut [f64], rng: &mut ChaCha8Rng) {
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        mul_into(&step.phi, x, &mut self.buf);
        x.copy_from_slice(&self.buf);
        mul_into(&step.sqrt, &self.z, &mut self.buf);
        for (xi, n) in x.iter_mut().zip(&self.buf) {
            *xi += n;
        }
    }

    /// `x ← Φ x`.
    fn propagate(&mut self, phi: &Matrix, x: &mut [f64]) {
        mul_into(phi, x, &mut self.buf);
        x.copy_from_slice(&self.buf);
    }

    /// `x ← S ξ`, `ξ ~ N(0, I)`.
    fn draw(&mut self, sqrt: &Matrix, x: &mut [f64], rng: &mut ChaCha8Rng) {
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        mul_into(sqrt, &self.z, x);
    }
}

/// Equal partition of a segment.
struct Cells {
    count: usize,
    width: f64,
    half: Step,
}

impl Cells {
    fn new(model: &ProcessModel, len: f64, step: f64) -> Result<Option<Self>> {
        if len == 0.0 {
            return Ok(None);
        }
        let count = ((len / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let width = len / count as f64;
        Ok(Some(Self {
            count,
            width,
            half: Step::new(model, 0.5 * width)?,
        }))
    }
}

struct Kernel {
    k: usize,
    r: f64,
    eps: f64,
    wait: Option<Cells>,
    attempt: Cells,
    /// Transition over one attempt, for the initial state.
    full: Step,
    /// `K = Q_x (Q_x + q_w I)⁻¹`, so that `F_τ = e^{Aτ} K`.
    gain: Matrix,
    qx_sqrt: Matrix,
    w_sd: f64,
}

impl Kernel {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let m = &cfg.model;
        let q_x = m.steady_covariance();
        // Kᵀ = (Q_x + q_w I)⁻¹ Q_x
        let gain = q_x.add_diag(cfg.q_w).solve(q_x)?.transpose();
        Ok(Self {
            k: m.dim(),
            r: cfg.r,
            eps: cfg.eps,
            wait: Cells::new(m, cfg.s, cfg.mse_grid_step)?,
            attempt: Cells::new(m, cfg.r, cfg.mse_grid_step)?.expect("r > 0"),
            full: Step::new(m, cfg.r)?,
            gain,
            qx_sqrt: linalg::psd_sqrt(q_x),
            w_sd: cfg.q_w.sqrt(),
        })
    }
}

/// Time integrals of one path after burn-in.
#[derive(Debug, Clone, Default)]
struct PathSums {
    delay: f64,
    channel: f64,
    total: f64,
    age: f64,
    time: f64,
    /// Per age bin: (∫‖e‖², ∫τ, time).
    bins: Vec<[f64; 3]>,
}

fn run_path(kernel: &Kernel, cfg: &SimConfig, path: usize, edges: &[f64]) -> PathSums {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path as u64);
    let k = kernel.k;
    let mut ws = Workspace::new(k);
    let mut sums = PathSums {
        bins: vec![[0.0; 3]; edges.len().saturating_sub(1)],
        ..PathSums::default()
    };

    // held sample x(−r) and its noisy copy, then the state at t = 0
    let mut sample = vec![0.0; k];
    ws.draw(&kernel.qx_sqrt, &mut sample, &mut rng);
    let mut x = sample.clone();
    ws.advance(&kernel.full, &mut x, &mut rng);
    let mut y = vec![0.0; k];
    let (mut t, mut nu) = (0.0f64, -kernel.r);

    // noiseless prediction e^{Aτ} x(ν) and estimate F_τ y
    let mut pred = vec![0.0; k];
    let mut est = vec![0.0; k];
    let mut ky = vec![0.0; k];

    for cycle in 0..BURN_IN_CYCLES + cfg.horizon_cycles {
        for (yi, si) in y.iter_mut().zip(&sample) {
            let w: f64 = StandardNormal.sample(&mut rng);
            *yi = si + kernel.w_sd * w;
        }
        let mut age = t - nu;
        assert!(
            (age - kernel.r).abs() <= 1e-9 * (1.0 + t.abs()),
            "age must reset to r at a success: {age} vs {}",
            kernel.r
        );
        age = kernel.r;
        mul_into(&kernel.full.phi, &sample, &mut pred);
        mul_into(&kernel.gain, &y, &mut ky);
        mul_into(&kernel.full.phi, &ky, &mut est);

        let record = cycle >= BURN_IN_CYCLES;
        let m = timing::sample_retransmissions(kernel.eps, &mut rng) as usize;
        let segments = std::iter::once(kernel.wait.as_ref())
            .chain(std::iter::repeat(Some(&kernel.attempt)).take(m + 1))
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, c)));
        for (seg, cells) in segments {
            if seg == m + 1 {
                // start of the delivered attempt
                sample.copy_from_slice(&x);
                nu = t;
            }
            for _ in 0..cells.count {
                let h = cells.width;
                ws.advance(&cells.half, &mut x, &mut rng);
                ws.propagate(&cells.half.phi, &mut pred);
                ws.propagate(&cells.half.phi, &mut est);
                if record {
                    let mid = age + 0.5 * h;
                    let e_total = sq_dist(&x, &est);
                    sums.delay += sq_dist(&x, &pred) * h;
                    sums.channel += sq_dist(&pred, &est) * h;
                    sums.total += e_total * h;
                    sums.age += mid * h;
                    sums.time += h;
                    if !sums.bins.is_empty() && mid >= edges[0] {
                        let idx = edges.partition_point(|&e| e <= mid);
                        if idx < edges.len() {
                            let b = &mut sums.bins[idx - 1];
                            b[0] += e_total * h;
                            b[1] += mid * h;
                            b[2] += h;
                        }
                    }
                }
                ws.advance(&cells.half, &mut x, &mut rng);
                ws.propagate(&cells.half.phi, &mut pred);
                ws.propagate(&cells.half.phi, &mut est);
                age += h;
                t += h;
            }
        }
    }
    sums
}

fn run_paths(cfg: &SimConfig, edges: &[f64]) -> Result<Vec<PathSums>> {
    cfg.validate()?;
    let kernel = Kernel::new(cfg)?;
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|p| run_path(&kernel, cfg, p, edges))
        .collect())
}

/// Runs `cfg.paths` independent paths in parallel. Path `p` draws from the
/// ChaCha8 stream `p` of `cfg.seed`, so the result does not depend on the
/// number of threads.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    let paths = run_paths(cfg, &[])?;
    let pick = |f: fn(&PathSums) -> f64| paths.iter().map(f).collect::<Vec<_>>();
    let time = pick(|p| p.time);
    Ok(SimResult {
        mse: ratio(&pick(|p| p.total), &time),
        aoi: ratio(&pick(|p| p.age), &time),
        mse_delay: ratio(&pick(|p| p.delay), &time),
        mse_channel: ratio(&pick(|p| p.channel), &time),
        cycles_observed: (cfg.paths * cfg.horizon_cycles) as u64,
    })
}

/// Empirical MSE conditioned on the age falling in each `[edges[i], edges[i+1])`.
pub fn simulate_age_profile(cfg: &SimConfig, edges: &[f64]) -> Result<Vec<AgeBin>> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("edges", "need at least two strictly increasing values"));
    }
    let paths = run_paths(cfg, edges)?;
    Ok((0..edges.len() - 1)
        .map(|b| {
            let err: Vec<f64> = paths.iter().map(|p| p.bins[b][0]).collect();
            let time: Vec<f64> = paths.iter().map(|p| p.bins[b][2]).collect();
            let total: f64 = time.iter().sum();
            let tau: f64 = paths.iter().map(|p| p.bins[b][1]).sum();
            AgeBin {
                lo: edges[b],
                hi: edges[b + 1],
                tau_mean: tau / total,
                mse: ratio(&err, &time),
                time: total,
            }
        })
        .collect())
}
