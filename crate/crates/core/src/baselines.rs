//! Reference estimators: Monte Carlo sampling of DER setpoints, the
//! network-blind Minkowski box, and independent per-period maps.

use std::fmt::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_hull, Point, Polygon};
use crate::model::{
    assemble_replicas, AssemblyOptions, ModelError, NetworkMode, OptimizationModel, VarKind,
};
use crate::network::Network;
use crate::par::{self, Parallelism};
use crate::region::{make_directions, solve_linear_map, FlexibilityMap, MapMetadata, ObjectiveKind, RegionConfig, RegionError};
use crate::solver::{loss_objective, solve_conic, Objective, SolveRequest, SolveStats};

/// Largest relaxation gap for a sampled power flow to count as physical.
pub const SAMPLE_GAP_TOL: f64 = 1e-6;
/// Slack allowed on voltage and current limits of a sampled power flow.
pub const SAMPLE_LIMIT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("at least one sample is required")]
    NoSamples,
    #[error("period {t} is outside the horizon of {horizon}")]
    Period { t: usize, horizon: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Feasible,
    /// A battery setpoint over- or under-runs its stored energy.
    Storage,
    /// Voltage or current outside its limits.
    Limits,
    /// Power flow relaxation not tight at the sampled setpoints.
    Inexact,
    /// No power flow solution at all.
    Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub idx: usize,
    /// PCC exchange of the sample; NaN when no power flow was found.
    pub point: Point,
    pub outcome: Outcome,
}

impl Sample {
    pub fn feasible(&self) -> bool {
        self.outcome == Outcome::Feasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCloud {
    /// Every attempted sample in index order.
    pub samples: Vec<Sample>,
    pub attempted: usize,
    pub feasible: usize,
    pub seed: u64,
}

impl SampleCloud {
    /// PCC points of the feasible samples.
    pub fn points(&self) -> Vec<Point> {
        self.samples.iter().filter(|s| s.feasible()).map(|s| s.point).collect()
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.samples.iter().filter(|s| s.outcome == outcome).count()
    }

    /// `idx,p,q,feasible`, one row per attempted sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("idx,p,q,feasible\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.idx, s.point.0, s.point.1, u8::from(s.feasible()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRegion {
    pub cloud: SampleCloud,
    /// Convex hull of the feasible points; empty when there are none.
    pub hull: Polygon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub network: NetworkMode,
    pub parallelism: Parallelism,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { network: NetworkMode::DistFlow, parallelism: Parallelism::Parallel }
    }
}

/// One draw of every DER setpoint.
struct Setpoints {
    pg: Vec<f64>,
    qg: Vec<f64>,
    /// Battery power, positive when charging.
    battery: Vec<f64>,
}

/// Sample `idx` depends only on `seed` and `idx`, so clouds for growing `n`
/// share their prefix.
fn draw(net: &Network, seed: u64, idx: usize) -> Setpoints {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let mut pg = Vec::with_capacity(net.generators.len());
    let mut qg = Vec::with_capacity(net.generators.len());
    for g in &net.generators {
        pg.push(uniform(g.pmin, g.pmax));
        qg.push(uniform(g.qmin, g.qmax));
    }
    let battery = net.batteries.iter().map(|b| uniform(-b.pd_max, b.pc_max)).collect();
    Setpoints { pg, qg, battery }
}

fn storage_ok(net: &Network, s: &Setpoints) -> bool {
    let dt = net.demand.dt;
    net.batteries.iter().zip(&s.battery).all(|(b, &pb)| {
        let e = if pb >= 0.0 { b.e0 + b.eta_c * pb * dt } else { b.e0 + pb / b.eta_d * dt };
        (0.0..=b.emax).contains(&e)
    })
}

fn copper_plate_point(net: &Network, t: usize, s: &Setpoints) -> Point {
    let (pd, qd) = net.total_demand(t);
    let p = pd - s.pg.iter().sum::<f64>() + s.battery.iter().sum::<f64>();
    let q = qd - s.qg.iter().sum::<f64>();
    (p, q)
}

fn fixings(model: &OptimizationModel, s: &Setpoints) -> Vec<(usize, f64, f64)> {
    let layout = model.layout.expect("assembled model has a layout");
    let mut fixed = Vec::new();
    let mut pin = |kind, e, v: f64| fixed.push((layout.var(kind, e, 0, 0), v, v));
    for (e, (&p, &q)) in s.pg.iter().zip(&s.qg).enumerate() {
        pin(VarKind::PGen, e, p);
        pin(VarKind::QGen, e, q);
    }
    for (e, &pb) in s.battery.iter().enumerate() {
        let charging = pb >= 0.0;
        pin(VarKind::PCharge, e, pb.max(0.0));
        pin(VarKind::PDischarge, e, (-pb).max(0.0));
        pin(VarKind::UCharge, e, f64::from(u8::from(charging)));
        pin(VarKind::UDischarge, e, f64::from(u8::from(!charging)));
    }
    fixed
}

/// Power flow at the sampled setpoints: loss-minimizing conic solve with
/// limits relaxed, then the limits and the cone gap are checked.
fn distflow_sample(net: &Network, model: &OptimizationModel, s: &Setpoints) -> (Point, Outcome) {
    let layout = model.layout.expect("assembled model has a layout");
    let req = SolveRequest::new(model, Objective::Linear(loss_objective(model))).with_fixed(fixings(model, s));
    let sol = solve_conic(&req);
    if !sol.status.is_ok() {
        return ((f64::NAN, f64::NAN), Outcome::Solver);
    }
    let x = &sol.x;
    let point = (x[layout.var(VarKind::PPcc, 0, 0, 0)], x[layout.var(VarKind::QPcc, 0, 0, 0)]);
    if sol.max_gap(model) > SAMPLE_GAP_TOL {
        return (point, Outcome::Inexact);
    }
    let volts_ok = net.buses.iter().enumerate().all(|(i, b)| {
        let v = x[layout.var(VarKind::V, i, 0, 0)];
        v >= b.vmin_sq - SAMPLE_LIMIT_TOL && v <= b.vmax_sq + SAMPLE_LIMIT_TOL
    });
    let amps_ok = net.lines.iter().enumerate().all(|(k, line)| {
        line.imax_sq.is_none_or(|m| x[layout.var(VarKind::L, k, 0, 0)] <= m + SAMPLE_LIMIT_TOL)
    });
    (point, if volts_ok && amps_ok { Outcome::Feasible } else { Outcome::Limits })
}

/// Draw `n` DER setpoints uniformly within their device boxes for period `t`
/// (0-based), keep those whose power flow meets every limit, and hull them.
pub fn monte_carlo_region(
    net: &Network,
    t: usize,
    n: usize,
    seed: u64,
    options: SamplingOptions,
) -> Result<MonteCarloRegion, BaselineError> {
    if n == 0 {
        return Err(BaselineError::NoSamples);
    }
    if t >= net.horizon() {
        return Err(BaselineError::Period { t, horizon: net.horizon() });
    }
    let period = net.period(t);
    let grid = options.network == NetworkMode::DistFlow && !net.lines.is_empty();
    let model = if grid {
        let opts = AssemblyOptions { limits: false, ramps: false, ..AssemblyOptions::default() };
        Some(assemble_replicas(&period, 1, opts)?)
    } else {
        None
    };
    let samples = par::map_indexed(n, options.parallelism, |idx| {
        let s = draw(net, seed, idx);
        let (point, outcome) = match &model {
            Some(m) if storage_ok(net, &s) => distflow_sample(&period, m, &s),
            Some(_) => ((f64::NAN, f64::NAN), Outcome::Storage),
            None => {
                let outcome = if storage_ok(net, &s) { Outcome::Feasible } else { Outcome::Storage };
                (copper_plate_point(net, t, &s), outcome)
            }
        };
        Sample { idx, point, outcome }
    });
    let feasible = samples.iter().filter(|s| s.feasible()).count();
    let cloud = SampleCloud { samples, attempted: n, feasible, seed };
    if feasible == 0 {
        log::warn!(
            "no feasible samples: storage {}, limits {}, inexact {}, solver {}",
            cloud.count(Outcome::Storage),
            cloud.count(Outcome::Limits),
            cloud.count(Outcome::Inexact),
            cloud.count(Outcome::Solver)
        );
    }
    let hull = convex_hull(&cloud.points());
    Ok(MonteCarloRegion { cloud, hull })
}

/// Sum of the device P and Q intervals offset by demand, counter-clockwise.
/// Zero-width sides collapse, down to a single point without DERs.
pub fn minkowski_box(net: &Network, t: usize) -> Polygon {
    let (pd, qd) = net.total_demand(t);
    let (mut p0, mut p1, mut q0, mut q1) = (pd, pd, qd, qd);
    for g in &net.generators {
        p0 -= g.pmax;
        p1 -= g.pmin;
        q0 -= g.qmax;
        q1 -= g.qmin;
    }
    for b in &net.batteries {
        p0 -= b.pd_max;
        p1 += b.pc_max;
    }
    let mut vertices: Vec<Point> = Vec::with_capacity(4);
    for v in [(p0, q0), (p1, q0), (p1, q1), (p0, q1)] {
        if vertices.last() != Some(&v) && vertices.first() != Some(&v) {
            vertices.push(v);
        }
    }
    Polygon::new(vertices)
}

/// `T` independent single-period maps; nothing couples the periods.
pub fn per_period_map(net: &Network, cfg: &RegionConfig) -> Result<FlexibilityMap, BaselineError> {
    let start = Instant::now();
    let directions = make_directions(cfg.h_count, cfg.offset)?;
    let maps = par::map_indexed(net.horizon(), Parallelism::Parallel, |t| {
        solve_linear_map(&net.period(t), cfg)
    });
    let mut periods = Vec::with_capacity(maps.len());
    let mut dispatches = Vec::with_capacity(maps.len());
    let mut stats = SolveStats::default();
    let (mut objective_value, mut max_gap) = (0.0, 0.0_f64);
    for (t, map) in maps.into_iter().enumerate() {
        let mut map = map?;
        stats.absorb(&map.metadata.stats);
        objective_value += map.metadata.objective_value;
        max_gap = max_gap.max(map.metadata.max_gap);
        periods.push(map.periods.swap_remove(0));
        let mut row = map.dispatches.swap_remove(0);
        for d in &mut row {
            d.t = t;
        }
        dispatches.push(row);
    }
    Ok(FlexibilityMap {
        directions,
        metadata: MapMetadata {
            h_count: cfg.h_count,
            t_count: periods.len(),
            options: cfg.options,
            objective: ObjectiveKind::Linear,
            loss_price: cfg.price,
            stats,
            wall_time_s: start.elapsed().as_secs_f64(),
            objective_value,
            area_trace: Vec::new(),
            max_gap,
            ramp_rows: 0,
        },
        periods,
        dispatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn box_of_single_generator() {
        let b = minkowski_box(&fixtures::copper_plate(), 0);
        let want = [(-0.2, -0.073), (1.3, -0.073), (1.3, 0.927), (-0.2, 0.927)];
        assert_eq!(b.vertices.len(), 4);
        for (a, w) in b.vertices.iter().zip(want) {
            assert!((a.0 - w.0).abs() < 1e-12 && (a.1 - w.1).abs() < 1e-12, "{a:?} vs {w:?}");
        }
    }

    #[test]
    fn box_without_ders_is_demand() {
        let mut net = fixtures::copper_plate();
        net.generators.clear();
        let b = minkowski_box(&net, 0);
        assert_eq!(b.vertices.len(), 1);
        let (p, q) = b.vertices[0];
        assert!((p - 1.3).abs() < 1e-12 && (q - 0.427).abs() < 1e-12);
    }

    #[test]
    fn sample_prefix_is_stable() {
        let net = fixtures::five_bus();
        let a = draw(&net, 7, 3);
        let b = draw(&net, 7, 3);
        assert_eq!(a.pg, b.pg);
        assert_ne!(draw(&net, 7, 4).pg, a.pg);
    }
}
