//! Independent checks of a flexibility map.
//!
//! Residuals and relaxation gaps are recomputed from the network equations
//! on the witness dispatches, without going through the model builder. Path
//! feasibility asks a fresh single-trajectory model whether a sequence of PCC
//! points can be realized with every inter-temporal coupling active.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::Dispatch;
use crate::geometry::{contains_tol, GeometryError, Point, Polygon};
use crate::model::{
    assemble_replicas, AssemblyOptions, CouplingMode, Family, LinearRow, ModelError, NetworkMode,
    RowTag, VarKind, VariableRef,
};
use crate::network::{validate_radial, Network, NetworkError, Topology};
use crate::par::{self, Parallelism};
use crate::region::{DirectionSet, FlexibilityMap, MapCsv, MapMetadata, ObjectiveKind};
use crate::solver::{
    loss_objective, solve_with_binaries, Limits, LossPrice, Objective, SolveRequest, SolveStats, Status, Tolerances,
};

/// Gap above which a map is reported as relaxation-inexact.
pub const INEXACT_GAP: f64 = 1e-4;

/// Weight of losses against unit-weight PCC deviation in the oracle. Small
/// enough that no loss saving pays for leaving the path.
pub const ORACLE_LOSS_WEIGHT: f64 = 1e-3;
/// Optimality tolerance of the oracle solve. Its objective is a distance
/// near zero, so only an absolute gap is meaningful.
const ORACLE_GAP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dispatch (h={h}, t={t}): {what} has {got} entries, expected {want}")]
    Shape { h: usize, t: usize, what: &'static str, got: usize, want: usize },
    #[error("map covers {map} periods but the network has {net}")]
    Horizon { map: usize, net: usize },
    #[error("path has {got} points for a horizon of {want}")]
    PathLength { got: usize, want: usize },
}

/// Worst violation per constraint family.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub families: BTreeMap<Family, f64>,
}

impl Residuals {
    fn record(&mut self, family: Family, amount: f64) {
        let slot = self.families.entry(family).or_insert(0.0);
        // NaN must surface as a failure.
        if amount.is_nan() || amount > *slot {
            *slot = amount;
        }
    }

    pub fn max(&self) -> f64 {
        self.families.values().fold(0.0, |a: f64, &b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

fn below(v: f64, lo: f64) -> f64 {
    (lo - v).max(0.0)
}

fn above(v: f64, hi: f64) -> f64 {
    (v - hi).max(0.0)
}

fn outside(v: f64, lo: f64, hi: f64) -> f64 {
    below(v, lo).max(above(v, hi))
}

struct Grid<'a> {
    net: &'a Network,
    topo: Topology,
    gens_at: Vec<Vec<usize>>,
    bats_at: Vec<Vec<usize>>,
}

impl<'a> Grid<'a> {
    fn new(net: &'a Network) -> Result<Self, VerifyError> {
        let topo = validate_radial(net)?;
        let mut gens_at = vec![Vec::new(); net.buses.len()];
        let mut bats_at = vec![Vec::new(); net.buses.len()];
        for (g, gen) in net.generators.iter().enumerate() {
            gens_at[topo.index_of[&gen.bus]].push(g);
        }
        for (b, bat) in net.batteries.iter().enumerate() {
            bats_at[topo.index_of[&bat.bus]].push(b);
        }
        Ok(Grid { net, topo, gens_at, bats_at })
    }

    /// Net DER injection (p, q) at bus position `i`.
    fn injection(&self, d: &Dispatch, i: usize) -> (f64, f64) {
        let mut p: f64 = self.gens_at[i].iter().map(|&g| d.p_gen[g]).sum();
        let q: f64 = self.gens_at[i].iter().map(|&g| d.q_gen[g]).sum();
        for &b in &self.bats_at[i] {
            p += d.p_discharge[b] - d.p_charge[b];
        }
        (p, q)
    }

    fn shape(&self, d: &Dispatch, grid: bool) -> Result<(), VerifyError> {
        let net = self.net;
        let (buses, lines) = if grid { (net.buses.len(), net.lines.len()) } else { (0, 0) };
        let checks: [(&'static str, usize, usize); 11] = [
            ("v", d.v.len(), buses),
            ("l", d.l.len(), lines),
            ("p_flow", d.p_flow.len(), lines),
            ("q_flow", d.q_flow.len(), lines),
            ("p_gen", d.p_gen.len(), net.generators.len()),
            ("q_gen", d.q_gen.len(), net.generators.len()),
            ("p_charge", d.p_charge.len(), net.batteries.len()),
            ("p_discharge", d.p_discharge.len(), net.batteries.len()),
            ("energy", d.energy.len(), net.batteries.len()),
            ("u_charge", d.u_charge.len(), net.batteries.len()),
            ("u_discharge", d.u_discharge.len(), net.batteries.len()),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(VerifyError::Shape { h: d.h, t: d.t, what, got, want });
            }
        }
        Ok(())
    }

    /// Every single-replica equation and bound of dispatch `d` in period `t`.
    fn replica(&self, d: &Dispatch, t: usize, options: &AssemblyOptions, out: &mut Residuals) {
        let net = self.net;
        let topo = &self.topo;
        if options.network == NetworkMode::CopperPlate {
            let (pd, qd) = net.total_demand(t);
            let (mut p, mut q) = (d.p_pcc, d.q_pcc);
            for i in 0..net.buses.len() {
                let (pi, qi) = self.injection(d, i);
                p += pi;
                q += qi;
            }
            out.record(Family::PccActive, (p - pd).abs());
            out.record(Family::PccReactive, (q - qd).abs());
        } else {
            for (k, line) in net.lines.iter().enumerate() {
                let (i, j) = topo.line_ends[k];
                let (pd, qd) = net.demand_at(net.buses[j].id, t);
                let (pj, qj) = self.injection(d, j);
                let (p, q, l) = (d.p_flow[k], d.q_flow[k], d.l[k]);
                let out_p: f64 = topo.child_lines[j].iter().map(|&m| d.p_flow[m]).sum();
                let out_q: f64 = topo.child_lines[j].iter().map(|&m| d.q_flow[m]).sum();
                out.record(Family::ActiveBalance, (p - line.r * l - out_p + pj - pd).abs());
                out.record(Family::ReactiveBalance, (q - line.x * l - out_q + qj - qd).abs());
                let drop = d.v[j] - d.v[i] + 2.0 * (line.r * p + line.x * q) - line.z_sq() * l;
                out.record(Family::VoltageDrop, drop.abs());
                out.record(Family::PowerCone, (p * p + q * q - l * d.v[i]).max(0.0));
                let cap = if options.limits { line.imax_sq.unwrap_or(f64::INFINITY) } else { f64::INFINITY };
                out.record(Family::CurrentLimit, outside(l, 0.0, cap));
            }
            let root = topo.root;
            let (pd, qd) = net.demand_at(net.buses[root].id, t);
            let (pr, qr) = self.injection(d, root);
            let out_p: f64 = topo.child_lines[root].iter().map(|&m| d.p_flow[m]).sum();
            let out_q: f64 = topo.child_lines[root].iter().map(|&m| d.q_flow[m]).sum();
            out.record(Family::PccActive, (d.p_pcc - out_p + pr - pd).abs());
            out.record(Family::PccReactive, (d.q_pcc - out_q + qr - qd).abs());
            for (i, bus) in net.buses.iter().enumerate() {
                let v = d.v[i];
                let miss = if i == root {
                    (v - 1.0).abs()
                } else if options.limits {
                    outside(v, bus.vmin_sq, bus.vmax_sq)
                } else {
                    below(v, 0.0)
                };
                out.record(Family::VoltageLimit, miss);
            }
        }
        for (g, gen) in net.generators.iter().enumerate() {
            out.record(Family::GenActive, outside(d.p_gen[g], gen.pmin, gen.pmax));
            out.record(Family::GenReactive, outside(d.q_gen[g], gen.qmin, gen.qmax));
        }
        for (b, bat) in net.batteries.iter().enumerate() {
            let (pc, pd, uc, ud) = (d.p_charge[b], d.p_discharge[b], d.u_charge[b], d.u_discharge[b]);
            out.record(Family::EnergyLimit, outside(d.energy[b], 0.0, bat.emax));
            out.record(Family::ChargePower, outside(pc, 0.0, bat.pc_max));
            out.record(Family::DischargePower, outside(pd, 0.0, bat.pd_max));
            out.record(Family::ChargeLimit, above(pc, uc * bat.pc_max));
            out.record(Family::DischargeLimit, above(pd, ud * bat.pd_max));
            out.record(Family::Exclusivity, above(uc + ud, 1.0));
            out.record(Family::BinaryBox, (uc - uc.round()).abs().max((ud - ud.round()).abs()));
        }
    }

    /// Storage balance from `prev` (or the initial energy) into `d`.
    fn storage_step(&self, prev: Option<&Dispatch>, d: &Dispatch, out: &mut Residuals) {
        let dt = self.net.demand.dt;
        for (b, bat) in self.net.batteries.iter().enumerate() {
            let e0 = prev.map_or(bat.e0, |p| p.energy[b]);
            let want = e0 + (bat.eta_c * d.p_charge[b] - d.p_discharge[b] / bat.eta_d) * dt;
            out.record(Family::BatterySoc, (d.energy[b] - want).abs());
        }
    }

    fn terminal(&self, d: &Dispatch, out: &mut Residuals) {
        for (b, bat) in self.net.batteries.iter().enumerate() {
            out.record(Family::TerminalSoc, below(d.energy[b], bat.e0));
        }
    }

    fn ramp_step(&self, prev: &Dispatch, d: &Dispatch, out: &mut Residuals) {
        for (g, gen) in self.net.generators.iter().enumerate() {
            let step = d.p_gen[g] - prev.p_gen[g];
            let up = gen.ramp_up.unwrap_or(f64::INFINITY);
            let dn = gen.ramp_dn.unwrap_or(f64::INFINITY);
            out.record(Family::Ramp, outside(step, -dn, up));
        }
    }
}

/// Residuals of a `[t][h]` grid of dispatches under the equations selected
/// by `options`. Storage is chained per `h`; ramps follow the coupling mode.
pub fn check_dispatches(
    dispatches: &[Vec<Dispatch>],
    net: &Network,
    options: &AssemblyOptions,
) -> Result<Residuals, VerifyError> {
    if dispatches.len() != net.horizon() {
        return Err(VerifyError::Horizon { map: dispatches.len(), net: net.horizon() });
    }
    let grid = Grid::new(net)?;
    let mut out = Residuals::default();
    let distflow = options.network == NetworkMode::DistFlow;
    for (t, row) in dispatches.iter().enumerate() {
        for (h, d) in row.iter().enumerate() {
            grid.shape(d, distflow)?;
            grid.replica(d, t, options, &mut out);
            let prev = if t == 0 { None } else { dispatches[t - 1].get(h) };
            grid.storage_step(prev, d, &mut out);
            if options.terminal_soc && t + 1 == dispatches.len() {
                grid.terminal(d, &mut out);
            }
            if t > 0 && options.ramps {
                let partners: Vec<&Dispatch> = match options.coupling {
                    CouplingMode::SameIndex => dispatches[t - 1].get(h).into_iter().collect(),
                    CouplingMode::AllPairs => dispatches[t - 1].iter().collect(),
                };
                for p in partners {
                    grid.ramp_step(p, d, &mut out);
                }
            }
        }
    }
    Ok(out)
}

/// Residuals of every vertex witness of `map`, including the distance of each
/// vertex from its witness's PCC exchange.
pub fn check_residuals(map: &FlexibilityMap, net: &Network) -> Result<Residuals, VerifyError> {
    if map.periods.len() != map.dispatches.len() {
        return Err(VerifyError::Horizon { map: map.periods.len(), net: map.dispatches.len() });
    }
    let mut out = check_dispatches(&map.dispatches, net, &map.metadata.options)?;
    for (t, (poly, row)) in map.periods.iter().zip(&map.dispatches).enumerate() {
        if poly.len() != row.len() {
            return Err(VerifyError::Shape { h: 0, t, what: "witnesses", got: row.len(), want: poly.len() });
        }
        for (&(p, q), d) in poly.iter().zip(row) {
            out.record(Family::PccActive, (d.p_pcc - p).abs());
            out.record(Family::PccReactive, (d.q_pcc - q).abs());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GapLocation {
    pub line: usize,
    pub h: usize,
    pub t: usize,
}

/// Largest `l·v − p² − q²` over every line of every dispatch, with `v` the
/// sending-end voltage, and where it occurs.
pub fn relaxation_gap(dispatches: &[Vec<Dispatch>], net: &Network) -> Result<(f64, Option<GapLocation>), VerifyError> {
    let topo = validate_radial(net)?;
    let mut worst = (0.0, None);
    for d in dispatches.iter().flatten() {
        if d.l.len() != net.lines.len() {
            continue;
        }
        for (k, &(i, _)) in topo.line_ends.iter().enumerate() {
            let gap = d.l[k] * d.v[i] - d.p_flow[k].powi(2) - d.q_flow[k].powi(2);
            if gap > worst.0 || worst.1.is_none() {
                worst = (gap, Some(GapLocation { line: k, h: d.h, t: d.t }));
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleVerdict {
    Feasible,
    Infeasible,
    /// The solver stopped without a verdict.
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub verdict: OracleVerdict,
    pub status: Status,
    /// Largest distance, per coordinate, between the path and the closest
    /// reachable PCC exchange; NaN without a solution.
    pub deviation: f64,
    /// Relaxation gap of the loss-minimizing witness; zero without one. With
    /// binding current or voltage limits this witness can be loose even
    /// when a tight one exists.
    pub gap: f64,
    /// Operating point realizing each path point, in period order.
    pub witness: Vec<Dispatch>,
}

impl OracleResult {
    pub fn feasible(&self) -> bool {
        self.verdict == OracleVerdict::Feasible
    }
}

/// Can the PCC follow `path` (one point per period) within `tol`?
///
/// Solves one operating trajectory over the whole horizon with every ramp
/// and storage chain active, leaving the PCC free and minimizing its distance
/// from each path point, with losses as a minor term. The path is feasible when that
/// distance ends up within `tol`. Pinning the PCC instead leaves no interior
/// at region vertices, which stalls interior-point solvers.
pub fn feasibility_oracle(
    net: &Network,
    options: &AssemblyOptions,
    path: &[Point],
    tol: f64,
) -> Result<OracleResult, VerifyError> {
    if path.len() != net.horizon() {
        return Err(VerifyError::PathLength { got: path.len(), want: net.horizon() });
    }
    let mut model = assemble_replicas(net, 1, *options)?;
    let layout = model.layout.expect("assembled model has a layout");
    let mut objective: Vec<_> = loss_objective(&model).into_iter().map(|(j, c)| (j, c * ORACLE_LOSS_WEIGHT)).collect();
    for (t, &(p, q)) in path.iter().enumerate() {
        for (element, kind, target) in [(0, VarKind::PPcc, p), (1, VarKind::QPcc, q)] {
            let x = layout.var(kind, 0, 0, t);
            let name = VariableRef { kind: VarKind::Deviation, element, h: 0, t };
            let d = model.add_variable(name, 0.0, f64::INFINITY);
            // |x - target| <= d
            for (sign, lower, upper) in [(-1.0, f64::NEG_INFINITY, target), (1.0, target, f64::INFINITY)] {
                model.add_row(LinearRow {
                    family: Family::Other,
                    tag: RowTag { element, t, ..RowTag::default() },
                    terms: vec![(x, 1.0), (d, sign)],
                    lower,
                    upper,
                });
            }
            objective.push((d, -1.0));
        }
    }
    let req = SolveRequest::new(&model, Objective::Linear(objective))
        .with_tolerances(Tolerances { feasibility: tol.max(1e-9), optimality: ORACLE_GAP })
        .with_limits(Limits::default());
    let sol = solve_with_binaries(&req);
    let solved = matches!(sol.status, Status::Optimal | Status::Feasible);
    let deviation = if solved {
        path.iter()
            .enumerate()
            .flat_map(|(t, &(p, q))| {
                [(VarKind::PPcc, p), (VarKind::QPcc, q)].map(|(k, target)| (sol.x[layout.var(k, 0, 0, t)] - target).abs())
            })
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    let verdict = match sol.status {
        _ if solved && deviation <= tol => OracleVerdict::Feasible,
        _ if solved => OracleVerdict::Infeasible,
        Status::Infeasible => OracleVerdict::Infeasible,
        _ => OracleVerdict::SolverFailure,
    };
    let (gap, witness) = if verdict == OracleVerdict::Feasible {
        let w = (0..layout.t_count).map(|t| Dispatch::from_assignment(&layout, &sol.x, 0, t)).collect();
        (sol.max_gap(&model), w)
    } else {
        (0.0, Vec::new())
    };
    Ok(OracleResult { verdict, status: sol.status, deviation, gap, witness })
}

/// Periods `start..start + len` of `net` as their own horizon.
fn window(net: &Network, start: usize, len: usize) -> Network {
    let mut w = net.clone();
    w.demand.factors = net.demand.factors[start..start + len].to_vec();
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub residual_tol: f64,
    pub gap_tol: f64,
    /// PCC band of the path oracle.
    pub oracle_tol: f64,
    /// Random interior paths; zero skips every path check.
    pub trials: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            residual_tol: 1e-6,
            gap_tol: 1e-6,
            oracle_tol: 1e-6,
            trials: 100,
            seed: 0,
            parallelism: Parallelism::Parallel,
        }
    }
}

/// Outcome counts of a batch of path checks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathTally {
    pub attempted: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub solver_failures: usize,
    /// Largest witness relaxation gap among feasible paths.
    pub max_gap: f64,
    /// Description of the first path that was not feasible.
    pub first_failure: Option<String>,
}

impl PathTally {
    fn add(&mut self, label: impl FnOnce() -> String, r: &OracleResult) {
        self.attempted += 1;
        match r.verdict {
            OracleVerdict::Feasible => {
                self.feasible += 1;
                self.max_gap = self.max_gap.max(r.gap);
            }
            OracleVerdict::Infeasible => self.infeasible += 1,
            OracleVerdict::SolverFailure => self.solver_failures += 1,
        }
        if !r.feasible() && self.first_failure.is_none() {
            self.first_failure = Some(label());
        }
    }

    pub fn passes(&self) -> bool {
        self.feasible == self.attempted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zigzag {
    /// Vertex index used in each period.
    pub vertices: Vec<usize>,
    pub feasible: bool,
    /// Period `t` such that the path is feasible up to `t` but not `t + 1`.
    pub failing_transition: Option<usize>,
}

/// Where a map's witnesses come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapSource {
    /// Witnesses produced by the map solve itself.
    #[default]
    Solved,
    /// Vertices only; witnesses rebuilt by the path oracle, whose gap is
    /// reported without a verdict.
    Vertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verdicts {
    pub residuals: bool,
    pub gap: bool,
    /// False flags the map as relaxation-inexact.
    pub relaxation_exact: bool,
    pub vertex_paths: bool,
    pub transitions: bool,
    pub random_paths: bool,
    pub zigzag: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config: AuditConfig,
    pub source: MapSource,
    pub inexact_gap: f64,
    pub residuals: Residuals,
    pub max_residual: f64,
    pub max_gap: f64,
    pub gap_location: Option<GapLocation>,
    /// Each index-`h` trajectory through every period.
    pub vertex_paths: PathTally,
    /// Every (vertex at t, vertex at t + 1) pair.
    pub transitions: PathTally,
    pub random_paths: PathTally,
    pub zigzag: Option<Zigzag>,
    pub verdicts: Verdicts,
}

impl VerificationReport {
    fn new(cfg: &AuditConfig, source: MapSource) -> Self {
        VerificationReport {
            config: *cfg,
            source,
            inexact_gap: INEXACT_GAP,
            residuals: Residuals::default(),
            max_residual: 0.0,
            max_gap: 0.0,
            gap_location: None,
            vertex_paths: PathTally::default(),
            transitions: PathTally::default(),
            random_paths: PathTally::default(),
            zigzag: None,
            verdicts: Verdicts::default(),
        }
    }

    fn decide(&mut self) {
        let cfg = &self.config;
        let rebuilt = self.source == MapSource::Vertices;
        let v = &mut self.verdicts;
        v.residuals = self.residuals.passes(cfg.residual_tol);
        v.gap = rebuilt || self.max_gap <= cfg.gap_tol;
        v.relaxation_exact = rebuilt || self.max_gap <= INEXACT_GAP;
        v.vertex_paths = self.vertex_paths.passes();
        v.transitions = self.transitions.passes();
        v.random_paths = self.random_paths.passes();
        v.zigzag = self.zigzag.as_ref().is_none_or(|z| z.feasible);
        v.passed = v.residuals && v.gap && v.vertex_paths && v.transitions && v.random_paths && v.zigzag;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        let mut s = String::new();
        let _ = writeln!(s, "residuals     {}  max {:.3e} (tol {:.0e})", mark(self.verdicts.residuals), self.max_residual, self.config.residual_tol);
        for (f, v) in &self.residuals.families {
            if *v > self.config.residual_tol || v.is_nan() {
                let _ = writeln!(s, "  {:<16} {:.3e}", f.name(), v);
            }
        }
        if self.source == MapSource::Vertices {
            let _ = writeln!(s, "gap           n/a   max {:.3e} (oracle witnesses)", self.max_gap);
        } else {
            let inexact = if self.verdicts.relaxation_exact { "" } else { "  relaxation-inexact" };
            let _ = writeln!(s, "gap           {}  max {:.3e} (tol {:.0e}){inexact}", mark(self.verdicts.gap), self.max_gap, self.config.gap_tol);
        }
        let tallies = [
            ("vertex paths", &self.vertex_paths, self.verdicts.vertex_paths),
            ("transitions", &self.transitions, self.verdicts.transitions),
            ("random paths", &self.random_paths, self.verdicts.random_paths),
        ];
        for (name, t, ok) in tallies {
            if t.attempted == 0 {
                continue;
            }
            let _ = writeln!(s, "{name:<13} {}  {}/{} feasible, witness gap {:.3e}", mark(ok), t.feasible, t.attempted, t.max_gap);
            if let Some(f) = &t.first_failure {
                let _ = writeln!(s, "  first failure: {f}");
            }
        }
        if let Some(z) = &self.zigzag {
            let at = z.failing_transition.map(|t| format!(", fails between t={} and t={}", t + 1, t + 2)).unwrap_or_default();
            let _ = writeln!(s, "zigzag        {}  vertices {:?}{at}", mark(z.feasible), z.vertices.iter().map(|h| h + 1).collect::<Vec<_>>());
        }
        let _ = writeln!(s, "verdict       {}", if self.verdicts.passed { "PASS" } else { "FAIL" });
        s
    }
}

/// Uniform point of a convex polygon by rejection from its bounding box.
fn interior_point(poly: &Polygon, rng: &mut ChaCha8Rng) -> Point {
    let Some(((p0, q0), (p1, q1))) = poly.bounding_box() else {
        return (f64::NAN, f64::NAN);
    };
    let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    for _ in 0..10_000 {
        let pt = (draw(rng, p0, p1), draw(rng, q0, q1));
        if matches!(contains_tol(poly, pt, 0.0), Ok(true)) {
            return pt;
        }
    }
    // Degenerate polygon: fall back to its centroid of vertices.
    let n = poly.vertices.len() as f64;
    let (sp, sq) = poly.vertices.iter().fold((0.0, 0.0), |a, v| (a.0 + v.0, a.1 + v.1));
    (sp / n, sq / n)
}

/// Alternate the vertices of largest and smallest active import.
fn zigzag_vertices(map: &FlexibilityMap) -> Vec<usize> {
    let pick = |t: usize, high: bool| {
        let row = &map.periods[t];
        let cmp = |a: &&Point, b: &&Point| a.0.total_cmp(&b.0);
        let best = if high { row.iter().max_by(cmp) } else { row.iter().min_by(cmp) };
        row.iter().position(|v| Some(v) == best).unwrap_or(0)
    };
    (0..map.t_count()).map(|t| pick(t, t % 2 == 1)).collect()
}

fn path_of(map: &FlexibilityMap, vertices: &[usize]) -> Vec<Point> {
    vertices.iter().enumerate().map(|(t, &h)| map.periods[t][h]).collect()
}

/// Residuals, relaxation gaps and path feasibility of `map` in one report.
///
/// With `trials > 0` the path section checks every index-`h` trajectory,
/// every vertex-to-vertex transition between consecutive periods, `trials`
/// random interior paths and one zig-zag path between the extreme-import
/// vertices. Path checks run in parallel and merge by index.
pub fn audit_map(map: &FlexibilityMap, net: &Network, cfg: &AuditConfig) -> Result<VerificationReport, VerifyError> {
    audit(map, net, cfg, MapSource::Solved)
}

/// Audit a map known only by its vertices, such as one read back from CSV.
/// Each index-`h` chain is realized by the path oracle and its witnesses
/// stand in for the missing dispatches, so ramps are checked along chains
/// only.
pub fn audit_vertices(
    vertices: &MapCsv,
    net: &Network,
    options: &AssemblyOptions,
    cfg: &AuditConfig,
) -> Result<VerificationReport, VerifyError> {
    let t_count = vertices.periods.len();
    if t_count != net.horizon() {
        return Err(VerifyError::Horizon { map: t_count, net: net.horizon() });
    }
    let h_count = vertices.angles.len();
    let chains = par::map_indexed(h_count, cfg.parallelism, |h| {
        let path: Vec<Point> = vertices.periods.iter().map(|row| row[h]).collect();
        feasibility_oracle(net, options, &path, cfg.oracle_tol)
    });
    let mut tally = PathTally::default();
    let mut witnesses = Vec::with_capacity(h_count);
    for (h, r) in chains.into_iter().enumerate() {
        let r = r?;
        tally.add(|| format!("vertex {} in every period", h + 1), &r);
        witnesses.push(r.witness);
    }
    if !tally.passes() {
        let mut report = VerificationReport::new(cfg, MapSource::Vertices);
        report.vertex_paths = tally;
        report.decide();
        return Ok(report);
    }
    let dispatches = (0..t_count)
        .map(|t| (0..h_count).map(|h| Dispatch { h, ..witnesses[h][t].clone() }).collect())
        .collect();
    let options = AssemblyOptions { coupling: CouplingMode::SameIndex, ..*options };
    let map = FlexibilityMap {
        directions: DirectionSet { angles: vertices.angles.clone() },
        periods: vertices.periods.clone(),
        dispatches,
        metadata: MapMetadata {
            h_count,
            t_count,
            options,
            objective: ObjectiveKind::Linear,
            loss_price: LossPrice::default(),
            stats: SolveStats::default(),
            wall_time_s: 0.0,
            objective_value: 0.0,
            area_trace: Vec::new(),
            max_gap: 0.0,
            ramp_rows: 0,
        },
    };
    let mut report = audit(&map, net, cfg, MapSource::Vertices)?;
    if cfg.trials == 0 {
        report.vertex_paths = tally;
        report.decide();
    }
    Ok(report)
}

fn audit(map: &FlexibilityMap, net: &Network, cfg: &AuditConfig, source: MapSource) -> Result<VerificationReport, VerifyError> {
    let options = map.metadata.options;
    let mut report = VerificationReport::new(cfg, source);
    report.residuals = check_residuals(map, net)?;
    report.max_residual = report.residuals.max();
    (report.max_gap, report.gap_location) = relaxation_gap(&map.dispatches, net)?;

    if cfg.trials > 0 {
        let (h_count, t_count) = (map.h_count(), map.t_count());
        let tol = cfg.oracle_tol;
        let oracle = |n: &Network, path: &[Point]| feasibility_oracle(n, &options, path, tol);

        let chains = par::map_indexed(h_count, cfg.parallelism, |h| oracle(net, &path_of(map, &vec![h; t_count])));
        for (h, r) in chains.into_iter().enumerate() {
            report.vertex_paths.add(|| format!("vertex {} in every period", h + 1), &r?);
        }

        // Without storage nothing carries over beyond one step, so a
        // two-period window decides a transition; otherwise the path follows
        // vertex `a` up to `t`.
        let stateless = net.batteries.is_empty();
        let pairs = t_count.saturating_sub(1) * h_count * h_count;
        let trans = par::map_indexed(pairs, cfg.parallelism, |n| {
            let t = n / (h_count * h_count);
            let (a, b) = ((n / h_count) % h_count, n % h_count);
            if stateless {
                oracle(&window(net, t, 2), &[map.periods[t][a], map.periods[t + 1][b]])
            } else {
                let mut vs = vec![a; t + 1];
                vs.push(b);
                oracle(&window(net, 0, t + 2), &path_of(map, &vs))
            }
        });
        for (n, r) in trans.into_iter().enumerate() {
            let t = n / (h_count * h_count);
            let (a, b) = ((n / h_count) % h_count, n % h_count);
            report.transitions.add(|| format!("vertex {} at t={} to vertex {} at t={}", a + 1, t + 1, b + 1, t + 2), &r?);
        }

        let polys: Vec<Polygon> = (0..t_count).map(|t| map.polygon(t)).collect();
        let randoms = par::map_indexed(cfg.trials, cfg.parallelism, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let path: Vec<Point> = polys.iter().map(|p| interior_point(p, &mut rng)).collect();
            (oracle(net, &path), path)
        });
        for (k, (r, path)) in randoms.into_iter().enumerate() {
            report.random_paths.add(|| format!("trial {k}: {path:?}"), &r?);
        }

        let vertices = zigzag_vertices(map);
        let full = oracle(net, &path_of(map, &vertices))?;
        let failing_transition = if full.feasible() {
            None
        } else {
            // Shortest infeasible prefix.
            let mut at = None;
            for len in 2..=t_count {
                let r = oracle(&window(net, 0, len), &path_of(map, &vertices[..len]))?;
                if !r.feasible() {
                    at = Some(len - 2);
                    break;
                }
            }
            at
        };
        report.zigzag = Some(Zigzag { vertices, feasible: full.feasible(), failing_transition });
    }

    report.decide();
    Ok(report)
}
