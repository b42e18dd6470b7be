//! Subcommand implementations.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use aoimse::coding::{self, ChannelSpec};
use aoimse::linalg::{self, Matrix};
use aoimse::metrics::{self, EvalOptions, QwMode};
use aoimse::montecarlo::{self, SimConfig};
use aoimse::pareto::{self, Spacing, SweepGrid, SystemConfig};
use aoimse::process::ProcessModel;
use aoimse::timing::{self, LinkTiming};
use aoimse::Error;

use crate::args::{AxisSpacing, FrontArgs, PointArgs, SimArgs, SimulateArgs, SweepArgs, SystemArgs, ValidateArgs};
use crate::output;

/// Why a command stopped; each variant maps to one exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, files or input data.
    Usage(String),
    Core(Error),
    /// Some `validate` checks did not pass.
    Checks(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e {
                Error::InvalidArgument { .. }
                | Error::NonSquare { .. }
                | Error::DimensionMismatch { .. }
                | Error::TooLarge(_)
                | Error::NonFinite
                | Error::UnstableSystem
                | Error::NeverSucceeds(_) => 1,
                Error::ZeroCapacity
                | Error::ZeroRateCode { .. }
                | Error::InfeasibleRoot { .. }
                | Error::EmptyInput
                | Error::NoFeasiblePoints => 2,
                Error::Singular | Error::QuadratureFailure { .. } | Error::SeriesFailure(_) => 3,
            },
            Failure::Checks(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Checks(n) => write!(f, "{n} validation check(s) failed"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

pub type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn parse_list(flag: &str, text: &str, k: usize) -> Result<Matrix, Failure> {
    let data = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("--{flag}: expected comma-separated numbers")))?;
    if data.len() != k * k {
        return Err(Failure::Usage(format!(
            "--{flag}: expected k*k = {} entries for --k {k}, got {}",
            k * k,
            data.len()
        )));
    }
    Ok(Matrix::square(k, data)?)
}

pub fn build_model(sys: &SystemArgs) -> Result<ProcessModel, Failure> {
    let k = sys.k;
    let a = match &sys.a_matrix {
        Some(text) => parse_list("a-matrix", text, k)?,
        None if sys.a < 0.0 => Matrix::identity(k).scale(sys.a),
        None => return Err(Failure::Usage(format!("--a: must be < 0 for a stable process, got {}", sys.a))),
    };
    let q_u = match &sys.qu_matrix {
        Some(text) => parse_list("qu-matrix", text, k)?,
        None => Matrix::identity(k).scale(sys.q_u),
    };
    Ok(ProcessModel::new(a, q_u)?)
}

pub fn build_system(sys: &SystemArgs) -> Result<SystemConfig, Failure> {
    Ok(SystemConfig {
        model: build_model(sys)?,
        channel: ChannelSpec::new(sys.snr)?,
        link: LinkTiming::new(sys.alpha, sys.beta, sys.s)?,
        options: EvalOptions {
            q_w: sys.q_w.map_or(QwMode::WorstCase, QwMode::Explicit),
            source_var: sys.source_var.into(),
            integer_blocklength: sys.integer_blocklength,
            ..EvalOptions::default()
        },
    })
}

pub fn point(args: &PointArgs) -> CmdResult {
    let cfg = build_system(&args.system)?;
    let p = cfg.evaluate(args.d, args.eps)?;
    output::write_points(io::stdout().lock(), &[p]).map_err(|e| Failure::Usage(format!("stdout: {e}")))
}

fn spacing(s: AxisSpacing) -> Spacing {
    match s {
        AxisSpacing::Linear => Spacing::Linear,
        AxisSpacing::Log => Spacing::Log,
    }
}

fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>) -> CmdResult {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| io_failure(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let cfg = build_system(&args.system)?;
    let g = &args.grid;
    let lambda = *linalg::symmetric_eigenvalues(cfg.model.steady_covariance())
        .last()
        .expect("nonempty spectrum");
    let d_min = g.d_min.unwrap_or(1e-3 * lambda);
    let d_max = g.d_max.unwrap_or(0.99 * lambda);
    if g.d_points > 1 && d_min >= d_max {
        return Err(Failure::Usage(format!("--d-min ({d_min}) must be below --d-max ({d_max})")));
    }
    if g.eps_points > 1 && g.eps_min >= g.eps_max {
        return Err(Failure::Usage(format!(
            "--eps-min ({}) must be below --eps-max ({})",
            g.eps_min, g.eps_max
        )));
    }
    let grid = SweepGrid::new(
        pareto::spaced(d_min, d_max, g.d_points, spacing(g.d_spacing))?,
        pareto::spaced(g.eps_min, g.eps_max, g.eps_points, spacing(g.eps_spacing))?,
    )?;
    let points = pareto::sweep(&grid, &cfg);
    write_file(&args.out, |w| output::write_points(w, &points))?;
    let front = pareto::pareto_front(&points)?;
    write_file(&companion(&args.out, "front"), |w| output::write_points(w, &front))?;
    if args.curves {
        let curves = pareto::boundary_curves(&points)?;
        write_file(&companion(&args.out, "curves"), |w| output::write_curves(w, &curves))?;
    }
    let feasible = points.iter().filter(|p| p.feasible).count();
    eprintln!(
        "{} cells ({feasible} feasible), front of {} points written to {}",
        points.len(),
        front.len(),
        args.out.display()
    );
    Ok(())
}

pub fn front(args: &FrontArgs) -> CmdResult {
    let file = File::open(&args.input).map_err(|e| io_failure(&args.input, e))?;
    let points = output::read_points(io::BufReader::new(file)).map_err(Failure::Usage)?;
    let front = pareto::pareto_front(&points)?;
    if front.is_empty() {
        return Err(Error::NoFeasiblePoints.into());
    }
    match &args.out {
        Some(path) => write_file(path, |w| output::write_points(w, &front)),
        None => output::write_points(io::stdout().lock(), &front).map_err(|e| Failure::Usage(format!("stdout: {e}"))),
    }
}

fn sim_config(model: ProcessModel, q_w: f64, r: f64, s: f64, eps: f64, sim: &SimArgs) -> SimConfig {
    let base = SimConfig::new(model, q_w, r, s, eps);
    SimConfig {
        paths: sim.paths,
        horizon_cycles: sim.cycles,
        seed: sim.seed,
        mse_grid_step: sim.grid_step.unwrap_or(base.mse_grid_step),
        ..base
    }
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let cfg = build_system(&args.system)?;
    let p = cfg.evaluate(args.d, args.eps)?;
    let q_w = cfg.options.q_w.resolve(args.d)?;
    let sc = sim_config(cfg.model, q_w, p.r, cfg.link.wait(), args.eps, &args.sim);
    let sim = montecarlo::simulate(&sc)?;
    output::write_simulation(io::stdout().lock(), &p, &sim).map_err(|e| Failure::Usage(format!("stdout: {e}")))
}

struct Check {
    name: &'static str,
    analytic: f64,
    oracle: f64,
    tol: f64,
}

impl Check {
    fn passed(&self) -> bool {
        (self.analytic - self.oracle).abs() <= self.tol
    }
}

/// Truncated-series moments of `r (m + 1)` with `m` geometric.
fn series_moments(r: f64, eps: f64) -> (f64, f64) {
    let (mut s1, mut s2, mut w, mut j) = (0.0, 0.0, 1.0 - eps, 1u32);
    loop {
        let x = j as f64 * r;
        s1 += w * x;
        s2 += w * x * x;
        w *= eps;
        j += 1;
        if w * (j as f64 * r).powi(2) <= 1e-18 * s2 || j > 1_000_000 {
            return (s1, s2);
        }
    }
}

pub fn validate(args: &ValidateArgs) -> CmdResult {
    if args.sim.paths < 2 {
        return Err(Failure::Usage("--paths: validate needs at least 2 paths for standard errors".into()));
    }
    let cfg = build_system(&args.system)?;
    let (d, eps, s) = (args.d, args.eps, cfg.link.wait());
    let q_w = cfg.options.q_w.resolve(d)?;
    let mut checks = Vec::new();

    let r = if eps > 0.0 {
        let cp = coding::make_coding_point(&cfg.model, &cfg.channel, d, eps, cfg.options.source_var, q_w)?;
        checks.push(Check {
            name: "blocklength relation residual",
            analytic: cp.residual(),
            oracle: 0.0,
            tol: coding::RESIDUAL_TOL * (cp.n * cp.capacity).max(1.0),
        });
        let n = if cfg.options.integer_blocklength { cp.n.ceil() } else { cp.n };
        cfg.link.attempt_delay(n)?
    } else {
        args.r
    };

    let (m1, m2) = timing::success_delay_moments(r, eps)?;
    let (o1, o2) = series_moments(r, eps);
    checks.push(Check { name: "success delay mean vs series", analytic: m1, oracle: o1, tol: 1e-10 * m1 });
    checks.push(Check { name: "success delay second moment vs series", analytic: m2, oracle: o2, tol: 1e-10 * m2 });

    let (_, sigma) = cfg.model.transition(r)?;
    let (i, j) = (0, cfg.model.dim() - 1);
    let quad = linalg::quadrature(
        |mu| {
            linalg::mat_exp(cfg.model.system_matrix(), r - mu)
                .map(|e| e.congruence(cfg.model.input_covariance())[(i, j)])
                .unwrap_or(f64::NAN)
        },
        0.0,
        r,
        1e-13,
    )?;
    checks.push(Check {
        name: "transition covariance vs quadrature",
        analytic: sigma[(i, j)],
        oracle: quad,
        tol: 1e-9 * sigma.max_abs().max(1.0),
    });

    let numeric = metrics::avg_mse_general(&cfg.model, q_w, r, s, eps, metrics::DEFAULT_TOL)?;
    let analytic_mse = match cfg.model.as_scalar() {
        Some(p) => {
            let closed = metrics::avg_mse_scalar(&p, q_w, r, s, eps)?;
            checks.push(Check {
                name: "mse closed form vs numeric series",
                analytic: closed.mse,
                oracle: numeric.mse,
                tol: 1e-8 * closed.mse.abs().max(1.0),
            });
            closed.mse
        }
        None => numeric.mse,
    };

    let mut aoi = metrics::avg_aoi(r, s, eps)?;
    if args.force_fail {
        aoi *= 1.1;
    }
    let sim = montecarlo::simulate(&sim_config(cfg.model.clone(), q_w, r, s, eps, &args.sim))?;
    // Zero-variance runs (eps = 0) still carry rounding in the empirical mean.
    let band = |e: &montecarlo::Estimate, v: f64| (3.0 * e.se.expect("at least two paths")).max(1e-9 * v.abs());
    checks.push(Check {
        name: "mse vs Monte Carlo (3 se)",
        analytic: analytic_mse,
        oracle: sim.mse.mean,
        tol: band(&sim.mse, analytic_mse),
    });
    checks.push(Check { name: "aoi vs Monte Carlo (3 se)", analytic: aoi, oracle: sim.aoi.mean, tol: band(&sim.aoi, aoi) });

    let mut out = io::stdout().lock();
    let _ = writeln!(out, "validate: d={d} eps={eps} r={} s={s} q_w={q_w}", output::fmt_g12(r));
    let _ = writeln!(out, "{:<40} {:>20} {:>20} {:>12}  result", "check", "analytic", "oracle", "tol");
    let mut failed = 0;
    for c in &checks {
        let ok = c.passed();
        failed += usize::from(!ok);
        let _ = writeln!(
            out,
            "{:<40} {:>20} {:>20} {:>12}  {}",
            c.name,
            output::fmt_g12(c.analytic),
            output::fmt_g12(c.oracle),
            format!("{:.3e}", c.tol),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}
