use serde::{Deserialize, Serialize};

use super::{
    BilinearAudit, BinaryPair, Cone, Family, LinearRow, ModelError, OptimizationModel, RowTag,
    VarId, VarKind, VariableRef,
};
use crate::network::{validate_radial, Network, Topology};
use crate::par::{self, Parallelism};

/// Which cross-period pairs of extreme points the ramp rows bind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Point h at t+1 against point h at t.
    SameIndex,
    /// Every point at t+1 against every point at t.
    #[default]
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkMode {
    /// Branch-flow model with the line cones.
    #[default]
    DistFlow,
    /// Lossless single-bus balance; lines and network limits are ignored.
    CopperPlate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyOptions {
    pub coupling: CouplingMode,
    pub network: NetworkMode,
    /// Voltage and current limits.
    pub limits: bool,
    /// Generator ramp rows between consecutive periods.
    pub ramps: bool,
    /// Require each storage chain to end at least at its initial energy.
    pub terminal_soc: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            coupling: CouplingMode::AllPairs,
            network: NetworkMode::DistFlow,
            limits: true,
            ramps: true,
            terminal_soc: false,
        }
    }
}

const KINDS: [VarKind; 13] = [
    VarKind::V,
    VarKind::L,
    VarKind::PFlow,
    VarKind::QFlow,
    VarKind::PGen,
    VarKind::QGen,
    VarKind::PCharge,
    VarKind::PDischarge,
    VarKind::Energy,
    VarKind::UCharge,
    VarKind::UDischarge,
    VarKind::PPcc,
    VarKind::QPcc,
];

/// Position of every variable in a replicated network model. Each (h, t)
/// replica occupies one contiguous block with the kinds in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub h_count: usize,
    pub t_count: usize,
    pub buses: usize,
    pub lines: usize,
    pub generators: usize,
    pub batteries: usize,
    pub network: NetworkMode,
}

impl Layout {
    pub fn new(net: &Network, h_count: usize, network: NetworkMode) -> Self {
        Layout {
            h_count,
            t_count: net.horizon(),
            buses: net.buses.len(),
            lines: net.lines.len(),
            generators: net.generators.len(),
            batteries: net.batteries.len(),
            network,
        }
    }

    pub fn count(&self, kind: VarKind) -> usize {
        let grid = self.network == NetworkMode::DistFlow;
        match kind {
            VarKind::V if grid => self.buses,
            VarKind::L | VarKind::PFlow | VarKind::QFlow if grid => self.lines,
            VarKind::V | VarKind::L | VarKind::PFlow | VarKind::QFlow => 0,
            VarKind::PGen | VarKind::QGen => self.generators,
            VarKind::PCharge
            | VarKind::PDischarge
            | VarKind::Energy
            | VarKind::UCharge
            | VarKind::UDischarge => self.batteries,
            VarKind::PPcc | VarKind::QPcc => 1,
            VarKind::Deviation => 0,
        }
    }

    fn offset(&self, kind: VarKind) -> usize {
        KINDS
            .iter()
            .take_while(|&&k| k != kind)
            .map(|&k| self.count(k))
            .sum()
    }

    pub fn block(&self) -> usize {
        KINDS.iter().map(|&k| self.count(k)).sum()
    }

    pub fn replicas(&self) -> usize {
        self.h_count * self.t_count
    }

    pub fn total(&self) -> usize {
        self.block() * self.replicas()
    }

    pub fn var(&self, kind: VarKind, element: usize, h: usize, t: usize) -> VarId {
        debug_assert!(element < self.count(kind) && h < self.h_count && t < self.t_count);
        (t * self.h_count + h) * self.block() + self.offset(kind) + element
    }
}

/// Network data shared by the fragment builders.
#[derive(Debug, Clone)]
pub struct ModelContext<'a> {
    pub net: &'a Network,
    pub topo: Topology,
    pub layout: Layout,
    pub options: AssemblyOptions,
    gens_at: Vec<Vec<usize>>,
    bats_at: Vec<Vec<usize>>,
}

impl<'a> ModelContext<'a> {
    pub fn new(
        net: &'a Network,
        h_count: usize,
        options: AssemblyOptions,
    ) -> Result<Self, ModelError> {
        let topo = validate_radial(net)?;
        let mut gens_at = vec![Vec::new(); net.buses.len()];
        for (g, gen) in net.generators.iter().enumerate() {
            gens_at[topo.index_of[&gen.bus]].push(g);
        }
        let mut bats_at = vec![Vec::new(); net.buses.len()];
        for (b, bat) in net.batteries.iter().enumerate() {
            bats_at[topo.index_of[&bat.bus]].push(b);
        }
        Ok(ModelContext {
            net,
            layout: Layout::new(net, h_count, options.network),
            topo,
            options,
            gens_at,
            bats_at,
        })
    }

    fn var(&self, kind: VarKind, element: usize, h: usize, t: usize) -> VarId {
        self.layout.var(kind, element, h, t)
    }

    /// Injection terms of the DERs at bus index `i` as seen by a balance row
    /// written as `flow + injections = demand`.
    fn der_terms(&self, i: usize, h: usize, t: usize, active: bool) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for &g in &self.gens_at[i] {
            let kind = if active { VarKind::PGen } else { VarKind::QGen };
            terms.push((self.var(kind, g, h, t), 1.0));
        }
        if active {
            for &b in &self.bats_at[i] {
                terms.push((self.var(VarKind::PCharge, b, h, t), -1.0));
                terms.push((self.var(VarKind::PDischarge, b, h, t), 1.0));
            }
        }
        terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub var: VarId,
    pub lower: f64,
    pub upper: f64,
    pub family: Family,
}

/// Rows, cones and bounds contributed by one builder call.
#[derive(Debug, Clone, Default)]
pub struct Fragment {
    pub rows: Vec<LinearRow>,
    pub cones: Vec<Cone>,
    pub audits: Vec<BilinearAudit>,
    pub bounds: Vec<Bound>,
}

impl Fragment {
    fn extend(&mut self, other: Fragment) {
        self.rows.extend(other.rows);
        self.cones.extend(other.cones);
        self.audits.extend(other.audits);
        self.bounds.extend(other.bounds);
    }
}

fn nonzero(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

/// Power balance, voltage drop and line cone of replica (h, t), plus the
/// rows defining the PCC exchange as the net flow into the PCC bus.
pub fn build_distflow(ctx: &ModelContext<'_>, h: usize, t: usize) -> Fragment {
    let net = ctx.net;
    let topo = &ctx.topo;
    let mut frag = Fragment::default();
    let p_pcc = ctx.var(VarKind::PPcc, 0, h, t);
    let q_pcc = ctx.var(VarKind::QPcc, 0, h, t);

    if ctx.options.network == NetworkMode::CopperPlate {
        let (pd, qd) = net.total_demand(t);
        let mut pt = vec![(p_pcc, 1.0)];
        let mut qt = vec![(q_pcc, 1.0)];
        for i in 0..net.buses.len() {
            pt.extend(ctx.der_terms(i, h, t, true));
            qt.extend(ctx.der_terms(i, h, t, false));
        }
        let tag = RowTag { element: 0, h, t, h2: None };
        frag.rows.push(LinearRow::eq(Family::PccActive, tag, pt, pd));
        frag.rows.push(LinearRow::eq(Family::PccReactive, tag, qt, qd));
        return frag;
    }

    for (k, line) in net.lines.iter().enumerate() {
        let (i, j) = topo.line_ends[k];
        let (pd, qd) = net.demand_at(net.buses[j].id, t);
        let p = ctx.var(VarKind::PFlow, k, h, t);
        let q = ctx.var(VarKind::QFlow, k, h, t);
        let l = ctx.var(VarKind::L, k, h, t);
        let vi = ctx.var(VarKind::V, i, h, t);
        let vj = ctx.var(VarKind::V, j, h, t);
        let tag = RowTag { element: k, h, t, h2: None };

        let mut pt = vec![(p, 1.0), (l, -line.r)];
        let mut qt = vec![(q, 1.0), (l, -line.x)];
        for &m in &topo.child_lines[j] {
            pt.push((ctx.var(VarKind::PFlow, m, h, t), -1.0));
            qt.push((ctx.var(VarKind::QFlow, m, h, t), -1.0));
        }
        pt.extend(ctx.der_terms(j, h, t, true));
        qt.extend(ctx.der_terms(j, h, t, false));
        frag.rows.push(LinearRow::eq(Family::ActiveBalance, tag, nonzero(pt), pd));
        frag.rows.push(LinearRow::eq(Family::ReactiveBalance, tag, nonzero(qt), qd));

        let drop = vec![
            (vj, 1.0),
            (vi, -1.0),
            (p, 2.0 * line.r),
            (q, 2.0 * line.x),
            (l, -line.z_sq()),
        ];
        frag.rows.push(LinearRow::eq(Family::VoltageDrop, tag, nonzero(drop), 0.0));

        frag.cones.push(Cone::Rotated { x: l, y: vi, tail: vec![p, q] });
        frag.audits.push(BilinearAudit { line: k, h, t, l, v: vi, p, q, r: line.r, x: line.x });
    }

    let root = topo.root;
    let (pd, qd) = net.demand_at(net.buses[root].id, t);
    let mut pt = vec![(p_pcc, 1.0)];
    let mut qt = vec![(q_pcc, 1.0)];
    for &m in &topo.child_lines[root] {
        pt.push((ctx.var(VarKind::PFlow, m, h, t), -1.0));
        qt.push((ctx.var(VarKind::QFlow, m, h, t), -1.0));
    }
    pt.extend(ctx.der_terms(root, h, t, true));
    qt.extend(ctx.der_terms(root, h, t, false));
    let tag = RowTag { element: root, h, t, h2: None };
    frag.rows.push(LinearRow::eq(Family::PccActive, tag, pt, pd));
    frag.rows.push(LinearRow::eq(Family::PccReactive, tag, qt, qd));
    frag
}

/// Voltage and current bounds of replica (h, t). The PCC voltage is fixed at
/// 1.0 p.u.
pub fn build_engineering_limits(
    ctx: &ModelContext<'_>,
    h: usize,
    t: usize,
) -> Result<Vec<Bound>, ModelError> {
    let mut out = Vec::new();
    if ctx.options.network == NetworkMode::CopperPlate {
        return Ok(out);
    }
    let limits = ctx.options.limits;
    for (i, bus) in ctx.net.buses.iter().enumerate() {
        let var = ctx.var(VarKind::V, i, h, t);
        if i == ctx.topo.root {
            if limits && !(bus.vmin_sq <= 1.0 && 1.0 <= bus.vmax_sq) {
                return Err(ModelError::SlackOutsideBounds {
                    bus: bus.id,
                    lo: bus.vmin_sq,
                    hi: bus.vmax_sq,
                });
            }
            out.push(Bound { var, lower: 1.0, upper: 1.0, family: Family::VoltageLimit });
        } else if limits {
            out.push(Bound {
                var,
                lower: bus.vmin_sq,
                upper: bus.vmax_sq,
                family: Family::VoltageLimit,
            });
        } else {
            out.push(Bound { var, lower: 0.0, upper: f64::INFINITY, family: Family::VoltageLimit });
        }
    }
    for (k, line) in ctx.net.lines.iter().enumerate() {
        let upper = match line.imax_sq {
            Some(v) if limits => v,
            _ => f64::INFINITY,
        };
        out.push(Bound {
            var: ctx.var(VarKind::L, k, h, t),
            lower: 0.0,
            upper,
            family: Family::CurrentLimit,
        });
    }
    Ok(out)
}

pub fn build_generator_limits(ctx: &ModelContext<'_>, h: usize, t: usize) -> Vec<Bound> {
    let mut out = Vec::with_capacity(2 * ctx.net.generators.len());
    for (g, gen) in ctx.net.generators.iter().enumerate() {
        out.push(Bound {
            var: ctx.var(VarKind::PGen, g, h, t),
            lower: gen.pmin,
            upper: gen.pmax,
            family: Family::GenActive,
        });
        out.push(Bound {
            var: ctx.var(VarKind::QGen, g, h, t),
            lower: gen.qmin,
            upper: gen.qmax,
            family: Family::GenReactive,
        });
    }
    out
}

/// Two-sided ramp rows `-R_dn <= p_gen(h, t+1) - p_gen(h', t) <= R_up`.
pub fn build_ramp(ctx: &ModelContext<'_>) -> Vec<LinearRow> {
    let mut rows = Vec::new();
    if !ctx.options.ramps {
        return rows;
    }
    let (hs, ts) = (ctx.layout.h_count, ctx.layout.t_count);
    for (g, gen) in ctx.net.generators.iter().enumerate() {
        if gen.ramp_up.is_none() && gen.ramp_dn.is_none() {
            continue;
        }
        let upper = gen.ramp_up.unwrap_or(f64::INFINITY);
        let lower = gen.ramp_dn.map_or(f64::NEG_INFINITY, |r| -r);
        for t in 0..ts.saturating_sub(1) {
            for h in 0..hs {
                let partners: Vec<usize> = match ctx.options.coupling {
                    CouplingMode::SameIndex => vec![h],
                    CouplingMode::AllPairs => (0..hs).collect(),
                };
                for hp in partners {
                    rows.push(LinearRow {
                        family: Family::Ramp,
                        tag: RowTag { element: g, h, t, h2: Some(hp) },
                        terms: vec![
                            (ctx.var(VarKind::PGen, g, h, t + 1), 1.0),
                            (ctx.var(VarKind::PGen, g, hp, t), -1.0),
                        ],
                        lower,
                        upper,
                    });
                }
            }
        }
    }
    rows
}

/// Storage chain of extreme point `h` across all periods: energy balance,
/// energy and power limits and the charge/discharge indicators.
pub fn build_battery(ctx: &ModelContext<'_>, h: usize) -> (Fragment, Vec<BinaryPair>) {
    let mut frag = Fragment::default();
    let mut pairs = Vec::new();
    let dt = ctx.net.demand.dt;
    for (b, bat) in ctx.net.batteries.iter().enumerate() {
        for t in 0..ctx.layout.t_count {
            let pc = ctx.var(VarKind::PCharge, b, h, t);
            let pd = ctx.var(VarKind::PDischarge, b, h, t);
            let e = ctx.var(VarKind::Energy, b, h, t);
            let uc = ctx.var(VarKind::UCharge, b, h, t);
            let ud = ctx.var(VarKind::UDischarge, b, h, t);
            let tag = RowTag { element: b, h, t, h2: None };

            let mut soc = vec![(e, 1.0), (pc, -bat.eta_c * dt), (pd, dt / bat.eta_d)];
            let rhs = if t == 0 {
                bat.e0
            } else {
                soc.push((ctx.var(VarKind::Energy, b, h, t - 1), -1.0));
                0.0
            };
            frag.rows.push(LinearRow::eq(Family::BatterySoc, tag, soc, rhs));
            frag.rows.push(LinearRow {
                family: Family::ChargeLimit,
                tag,
                terms: vec![(pc, 1.0), (uc, -bat.pc_max)],
                lower: f64::NEG_INFINITY,
                upper: 0.0,
            });
            frag.rows.push(LinearRow {
                family: Family::DischargeLimit,
                tag,
                terms: vec![(pd, 1.0), (ud, -bat.pd_max)],
                lower: f64::NEG_INFINITY,
                upper: 0.0,
            });
            frag.rows.push(LinearRow {
                family: Family::Exclusivity,
                tag,
                terms: vec![(uc, 1.0), (ud, 1.0)],
                lower: f64::NEG_INFINITY,
                upper: 1.0,
            });
            if ctx.options.terminal_soc && t + 1 == ctx.layout.t_count {
                frag.rows.push(LinearRow {
                    family: Family::TerminalSoc,
                    tag,
                    terms: vec![(e, 1.0)],
                    lower: bat.e0,
                    upper: f64::INFINITY,
                });
            }
            frag.bounds.extend([
                Bound { var: e, lower: 0.0, upper: bat.emax, family: Family::EnergyLimit },
                Bound { var: pc, lower: 0.0, upper: bat.pc_max, family: Family::ChargePower },
                Bound { var: pd, lower: 0.0, upper: bat.pd_max, family: Family::DischargePower },
                Bound { var: uc, lower: 0.0, upper: 1.0, family: Family::BinaryBox },
                Bound { var: ud, lower: 0.0, upper: 1.0, family: Family::BinaryBox },
            ]);
            pairs.push(BinaryPair { battery: b, h, t, uc, ud, pc, pd });
        }
    }
    (frag, pairs)
}

/// Assemble the full multi-period model over `h_count` extreme points and
/// every period of the network's demand profile. No objective is attached.
pub fn assemble(
    net: &Network,
    h_count: usize,
    options: AssemblyOptions,
) -> Result<OptimizationModel, ModelError> {
    if h_count < 3 {
        return Err(ModelError::TooFewPoints(h_count));
    }
    assemble_replicas(net, h_count, options)
}

/// Like [`assemble`] but without the polygon precondition; a single replica
/// chain (`h_count = 1`) is the path-feasibility model.
pub(crate) fn assemble_replicas(
    net: &Network,
    h_count: usize,
    options: AssemblyOptions,
) -> Result<OptimizationModel, ModelError> {
    let ctx = ModelContext::new(net, h_count, options)?;
    let layout = ctx.layout;
    let mut model = OptimizationModel::new();
    for t in 0..layout.t_count {
        for h in 0..layout.h_count {
            for kind in KINDS {
                for e in 0..layout.count(kind) {
                    let free = if kind.is_binary() { (0.0, 1.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
                    let id = model.add_variable(VariableRef { kind, element: e, h, t }, free.0, free.1);
                    debug_assert_eq!(id, layout.var(kind, e, h, t));
                }
            }
        }
    }

    let fragments: Vec<Result<Fragment, ModelError>> =
        par::map_indexed(layout.replicas(), Parallelism::Parallel, |r| {
            let (t, h) = (r / layout.h_count, r % layout.h_count);
            let mut frag = build_distflow(&ctx, h, t);
            frag.bounds.extend(build_engineering_limits(&ctx, h, t)?);
            frag.bounds.extend(build_generator_limits(&ctx, h, t));
            Ok(frag)
        });
    let mut merged = Fragment::default();
    for f in fragments {
        merged.extend(f?);
    }
    let mut pairs = Vec::new();
    for h in 0..layout.h_count {
        let (frag, p) = build_battery(&ctx, h);
        merged.extend(frag);
        pairs.extend(p);
    }
    let ramps = build_ramp(&ctx);
    log::debug!("assembled {} ramp rows", ramps.len());
    merged.rows.extend(ramps);

    for b in merged.bounds {
        model.set_bounds(b.var, b.lower, b.upper, b.family);
    }
    for r in merged.rows {
        model.add_row(r);
    }
    for c in merged.cones {
        model.add_cone(c);
    }
    model.audits = merged.audits;
    pairs.sort_by_key(|p| (p.t, p.battery, p.h));
    model.binary_pairs = pairs;
    model.vertices = (0..layout.t_count)
        .map(|t| {
            (0..layout.h_count)
                .map(|h| (layout.var(VarKind::PPcc, 0, h, t), layout.var(VarKind::QPcc, 0, h, t)))
                .collect()
        })
        .collect();
    model.layout = Some(layout);
    Ok(model)
}
