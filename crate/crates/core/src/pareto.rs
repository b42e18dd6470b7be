//! Grid sweep over `(d, ε)` and the resulting (MSE, AoI) trade-off.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::coding::ChannelSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{self, EvalOptions};
use crate::process::ProcessModel;
use crate::timing::LinkTiming;

pub use crate::metrics::TradeoffPoint;

/// Points per axis of the default grid.
pub const DEFAULT_GRID_POINTS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// `n` values from `lo` to `hi` inclusive.
pub fn spaced(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("points", "must be positive"));
    }
    if !(lo.is_finite() && hi.is_finite()) || (n > 1 && !(lo < hi)) {
        return Err(Error::invalid("range", format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if spacing == Spacing::Log && !(lo > 0.0) {
        return Err(Error::invalid("range", format!("log spacing needs lo > 0, got {lo}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = |i: usize| i as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|i| match (i, spacing) {
            (0, _) => lo,
            (i, _) if i == n - 1 => hi,
            (i, Spacing::Linear) => lo + (hi - lo) * step(i),
            (i, Spacing::Log) => (lo.ln() + (hi.ln() - lo.ln()) * step(i)).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    d_values: Vec<f64>,
    eps_values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(d_values: Vec<f64>, eps_values: Vec<f64>) -> Result<Self> {
        check_axis("d", &d_values, |d| d > 0.0 && d.is_finite())?;
        check_axis("eps", &eps_values, |e| e > 0.0 && e < 1.0)?;
        Ok(Self { d_values, eps_values })
    }

    /// `d` log-spaced over `[1e-3 λ, 0.99 λ]` with `λ` the largest eigenvalue
    /// of `Q_x`, `ε` linear over `[1e-4, 0.9]`; 60 points each.
    pub fn default_for(model: &ProcessModel) -> Self {
        let lambda = *linalg::symmetric_eigenvalues(model.steady_covariance())
            .last()
            .expect("nonempty spectrum");
        let n = DEFAULT_GRID_POINTS;
        Self::new(
            spaced(1e-3 * lambda, 0.99 * lambda, n, Spacing::Log).expect("valid range"),
            spaced(1e-4, 0.9, n, Spacing::Linear).expect("valid range"),
        )
        .expect("valid default grid")
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d_values
    }

    pub fn eps_values(&self) -> &[f64] {
        &self.eps_values
    }

    pub fn len(&self) -> usize {
        self.d_values.len() * self.eps_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell `i` in d-major order.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let ne = self.eps_values.len();
        (self.d_values[i / ne], self.eps_values[i % ne])
    }
}

fn check_axis(name: &'static str, v: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(name, "grid axis is empty"));
    }
    if let Some(bad) = v.iter().find(|x| !ok(**x)) {
        return Err(Error::invalid(name, format!("value {bad} out of range")));
    }
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(name, "grid axis must be strictly increasing"));
    }
    Ok(())
}

/// Everything but `(d, ε)` that a cell evaluation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub model: ProcessModel,
    pub channel: ChannelSpec,
    pub link: LinkTiming,
    pub options: EvalOptions,
}

impl SystemConfig {
    pub fn evaluate(&self, d: f64, eps: f64) -> Result<TradeoffPoint> {
        metrics::evaluate_point(&self.model, &self.channel, &self.link, d, eps, &self.options)
    }
}

/// Evaluates every cell in d-major order. Cells whose evaluation fails are
/// emitted as infeasible.
pub fn sweep(grid: &SweepGrid, cfg: &SystemConfig) -> Vec<TradeoffPoint> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (d, eps) = grid.cell(i);
            cfg.evaluate(d, eps)
                .unwrap_or_else(|_| TradeoffPoint::infeasible(d, eps))
        })
        .collect()
}

/// Feasible points not dominated in (MSE, AoI), sorted by AoI. Of several
/// points with identical coordinates only the first in input order is kept.
pub fn pareto_front(points: &[TradeoffPoint]) -> Result<Vec<TradeoffPoint>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| points[i].feasible).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (&points[i], &points[j]);
        p.aoi.total_cmp(&q.aoi).then(p.mse.total_cmp(&q.mse)).then(i.cmp(&j))
    });
    let mut best = f64::INFINITY;
    let mut front = Vec::new();
    for i in order {
        if points[i].mse < best {
            best = points[i].mse;
            front.push(points[i]);
        }
    }
    Ok(front)
}

/// Lower envelopes of each MSE series against AoI.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryCurves {
    pub aoi: Vec<f64>,
    pub mse_delay: Vec<f64>,
    pub mse_channel: Vec<f64>,
    pub mse: Vec<f64>,
}

impl BoundaryCurves {
    pub fn len(&self) -> usize {
        self.aoi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aoi.is_empty()
    }
}

/// Relative resolution at which AoI values are merged into one level.
pub const AOI_RESOLUTION: f64 = 1e-6;

fn values(p: &TradeoffPoint) -> [f64; 4] {
    [p.aoi, p.mse_delay_avg, p.mse_channel_avg, p.mse]
}

/// For every achieved AoI level, the smallest value of each MSE series.
///
/// The minimum runs over the points at that level and over the straight
/// line between every pair of feasible grid neighbours (adjacent `d` at equal
/// `ε`, or adjacent `ε` at equal `d`) whose AoI range contains the level.
/// Including these segments makes the envelope insensitive to how finely
/// the grid happens to sample a given AoI. Levels closer than
/// [`AOI_RESOLUTION`] times the largest AoI are merged.
pub fn boundary_curves(points: &[TradeoffPoint]) -> Result<BoundaryCurves> {
    let feasible: Vec<&TradeoffPoint> = points.iter().filter(|p| p.feasible).collect();
    if feasible.is_empty() {
        return Err(Error::NoFeasiblePoints);
    }

    let axis = |f: fn(&TradeoffPoint) -> f64| {
        let mut v: Vec<f64> = feasible.iter().map(|p| f(p)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let ds = axis(|p| p.d);
    let es = axis(|p| p.eps);
    let index = |v: &[f64], x: f64| v.binary_search_by(|y| y.total_cmp(&x)).expect("value on axis");
    let mut lattice: BTreeMap<(usize, usize), [f64; 4]> = BTreeMap::new();
    for p in &feasible {
        lattice.entry((index(&ds, p.d), index(&es, p.eps))).or_insert_with(|| values(p));
    }
    let mut segments: Vec<([f64; 4], [f64; 4])> = Vec::new();
    for (&(i, j), a) in &lattice {
        for nb in [(i + 1, j), (i, j + 1)] {
            if let Some(b) = lattice.get(&nb) {
                let (lo, hi) = if a[0] <= b[0] { (*a, *b) } else { (*b, *a) };
                segments.push((lo, hi));
            }
        }
    }
    segments.sort_by(|x, y| x.0[0].total_cmp(&y.0[0]).then(x.1[0].total_cmp(&y.1[0])));

    let mut sorted: Vec<[f64; 4]> = feasible.iter().map(|p| values(p)).collect();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let res = AOI_RESOLUTION * sorted.last().expect("nonempty")[0];

    let mut out = BoundaryCurves::default();
    let mut start = 0;
    while start < sorted.len() {
        let level = sorted[start][0];
        let mut end = start;
        let mut best = [f64::INFINITY; 3];
        while end < sorted.len() && sorted[end][0] - level <= res {
            for c in 0..3 {
                best[c] = best[c].min(sorted[end][c + 1]);
            }
            end += 1;
        }
        // segments are sorted by their low end, so only a prefix can contain the level
        let prefix = segments.partition_point(|s| s.0[0] <= level);
        for (lo, hi) in &segments[..prefix] {
            if hi[0] < level {
                continue;
            }
            let w = if hi[0] > lo[0] { (level - lo[0]) / (hi[0] - lo[0]) } else { 0.0 };
            for c in 0..3 {
                best[c] = best[c].min(lo[c + 1] + (hi[c + 1] - lo[c + 1]) * w);
            }
        }
        out.aoi.push(level);
        out.mse_delay.push(best[0]);
        out.mse_channel.push(best[1]);
        out.mse.push(best[2]);
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn section_v() -> SystemConfig {
        SystemConfig {
            model: ProcessModel::scalar(-0.02, 1.0).unwrap(),
            channel: ChannelSpec::new(10.0).unwrap(),
            link: LinkTiming::default(),
            options: EvalOptions::default(),
        }
    }

    fn pt(mse: f64, aoi: f64) -> TradeoffPoint {
        TradeoffPoint {
            d: 1.0,
            eps: 0.1,
            n: 1.0,
            r: 1.0,
            aoi,
            mse,
            mse_delay_avg: mse,
            mse_channel_avg: 0.0,
            feasible: true,
        }
    }

    fn brute_force_front(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
        let dominates = |p: &TradeoffPoint, q: &TradeoffPoint| {
            p.mse <= q.mse && p.aoi <= q.aoi && (p.mse < q.mse || p.aoi < q.aoi)
        };
        let mut keep: Vec<TradeoffPoint> = points
            .iter()
            .enumerate()
            .filter(|(i, q)| {
                q.feasible
                    && !points.iter().any(|p| p.feasible && dominates(p, q))
                    && !points[..*i]
                        .iter()
                        .any(|p| p.feasible && p.mse == q.mse && p.aoi == q.aoi)
            })
            .map(|(_, q)| *q)
            .collect();
        keep.sort_by(|a, b| a.aoi.total_cmp(&b.aoi));
        keep
    }

    #[test]
    fn spacing() {
        assert_eq!(spaced(1.0, 3.0, 3, Spacing::Linear).unwrap(), vec![1.0, 2.0, 3.0]);
        let v = spaced(0.01, 100.0, 5, Spacing::Log).unwrap();
        assert_eq!((v[0], v[4]), (0.01, 100.0));
        assert!((v[2] - 1.0).abs() < 1e-14);
        assert!(spaced(0.0, 1.0, 3, Spacing::Log).is_err());
        assert!(spaced(1.0, 1.0, 3, Spacing::Linear).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(vec![], vec![0.1]).is_err());
        assert!(SweepGrid::new(vec![1.0, 1.0], vec![0.1]).is_err());
        assert!(SweepGrid::new(vec![1.0], vec![1.0]).is_err());
        let g = SweepGrid::default_for(&section_v().model);
        assert_eq!(g.len(), 3600);
        assert!((g.d_values()[0] - 0.025).abs() < 1e-15 && (g.d_values()[59] - 24.75).abs() < 1e-13);
        assert_eq!(g.cell(61), (g.d_values()[1], g.eps_values()[1]));
    }

    #[test]
    fn degenerate_grid_equals_point_evaluation() {
        let cfg = section_v();
        let g = SweepGrid::new(vec![1.0], vec![0.5]).unwrap();
        assert_eq!(sweep(&g, &cfg), vec![cfg.evaluate(1.0, 0.5).unwrap()]);
    }

    #[test]
    fn sweep_invariants_and_determinism() {
        let cfg = section_v();
        let g = SweepGrid::new(
            spaced(0.025, 30.0, 50, Spacing::Log).unwrap(),
            spaced(1e-4, 0.9, 50, Spacing::Linear).unwrap(),
        )
        .unwrap();
        let pts = sweep(&g, &cfg);
        assert_eq!(pts.len(), 2500);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!((p.d, p.eps), g.cell(i));
            if p.feasible {
                assert!(p.n > 0.0 && p.r > 0.0 && p.aoi >= p.r && p.mse > 0.0);
                assert!((p.mse - p.mse_delay_avg - p.mse_channel_avg).abs() <= 1e-10 * p.mse);
            } else {
                assert!(p.d >= 25.0 || p.eps > 0.5);
            }
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| sweep(&g, &cfg));
        assert!(pts.iter().zip(&serial).all(|(a, b)| format!("{a:?}") == format!("{b:?}")));
    }

    #[test]
    fn front_examples() {
        assert_eq!(pareto_front(&[]), Err(Error::EmptyInput));
        let a = pt(1.0, 2.0);
        assert_eq!(pareto_front(&[a]).unwrap(), vec![a]);
        assert_eq!(pareto_front(&[a, pt(2.0, 3.0)]).unwrap(), vec![a]);
        let mut dup = a;
        dup.d = 9.0;
        assert_eq!(pareto_front(&[a, dup]).unwrap()[0].d, a.d);
        let inf = TradeoffPoint::infeasible(1.0, 0.9);
        assert!(pareto_front(&[inf]).unwrap().is_empty());
    }

    #[test]
    fn front_matches_brute_force_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for round in 0..20 {
            let pts: Vec<TradeoffPoint> = (0..500)
                .map(|i| {
                    // coarse values force ties
                    let q = if round % 2 == 0 { 20.0 } else { 1e6 };
                    let mut p = pt(
                        (rng.random::<f64>() * q).round() / q,
                        (rng.random::<f64>() * q).round() / q,
                    );
                    p.d = i as f64;
                    p.feasible = rng.random::<f64>() > 0.1;
                    p
                })
                .collect();
            let fast = pareto_front(&pts).unwrap();
            let slow = brute_force_front(&pts);
            assert_eq!(fast, slow);
            assert_eq!(pareto_front(&fast).unwrap(), fast);
        }
    }

    #[test]
    fn boundary_interpolates_along_grid_lines() {
        let mk = |d, eps, aoi, md, mc| TradeoffPoint {
            d,
            eps,
            n: 1.0,
            r: 1.0,
            aoi,
            mse: md + mc,
            mse_delay_avg: md,
            mse_channel_avg: mc,
            feasible: true,
        };
        // two neighbours along d; a third point off-lattice-adjacent
        let pts = [mk(1.0, 0.1, 1.0, 1.0, 4.0), mk(2.0, 0.1, 3.0, 3.0, 0.0), mk(3.0, 0.2, 2.0, 9.0, 9.0)];
        let c = boundary_curves(&pts).unwrap();
        assert_eq!(c.aoi, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.mse_delay, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.mse_channel, vec![4.0, 2.0, 0.0]);
        assert_eq!(c.mse, vec![5.0, 4.0, 3.0]);
        assert_eq!(
            boundary_curves(&[TradeoffPoint::infeasible(1.0, 0.1)]),
            Err(Error::NoFeasiblePoints)
        );
    }

    proptest! {
        #[test]
        fn front_is_nondominated_and_covers(raw in prop::collection::vec((0u8..30, 0u8..30), 1..80)) {
            let pts: Vec<TradeoffPoint> = raw.iter().map(|&(m, a)| pt(m as f64, a as f64)).collect();
            let front = pareto_front(&pts).unwrap();
            for (i, p) in front.iter().enumerate() {
                for q in &front[i + 1..] {
                    prop_assert!(p.aoi < q.aoi && p.mse > q.mse);
                }
            }
            for q in &pts {
                prop_assert!(front.iter().any(|p| p.mse <= q.mse && p.aoi <= q.aoi));
            }
        }
    }
}
