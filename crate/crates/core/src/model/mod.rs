//! Optimization model: variables, sparse linear rows, second-order cones and
//! the bilinear audit records kept alongside the relaxed power-flow cones.

mod builder;
mod listing;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builder::{
    assemble, build_battery, build_distflow, build_engineering_limits, build_generator_limits,
    build_ramp, AssemblyOptions, Bound, CouplingMode, Fragment, Layout, ModelContext, NetworkMode,
};
pub(crate) use builder::assemble_replicas;

pub type VarId = usize;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("at least 3 extreme points are needed for a polygon, got {0}")]
    TooFewPoints(usize),
    #[error("PCC bus {bus} voltage bounds [{lo}, {hi}] do not contain 1.0")]
    SlackOutsideBounds { bus: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    V,
    L,
    PFlow,
    QFlow,
    PGen,
    QGen,
    PCharge,
    PDischarge,
    Energy,
    UCharge,
    UDischarge,
    PPcc,
    QPcc,
    /// Distance of a PCC exchange from a target; outside the replica layout.
    Deviation,
}

impl VarKind {
    pub fn name(self) -> &'static str {
        match self {
            VarKind::V => "v",
            VarKind::L => "l",
            VarKind::PFlow => "p_flow",
            VarKind::QFlow => "q_flow",
            VarKind::PGen => "p_gen",
            VarKind::QGen => "q_gen",
            VarKind::PCharge => "p_charge",
            VarKind::PDischarge => "p_discharge",
            VarKind::Energy => "energy",
            VarKind::UCharge => "u_charge",
            VarKind::UDischarge => "u_discharge",
            VarKind::PPcc => "p_pcc",
            VarKind::QPcc => "q_pcc",
            VarKind::Deviation => "deviation",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, VarKind::UCharge | VarKind::UDischarge)
    }
}

/// Identity of a model variable: what it is, which element it belongs to and
/// which (extreme point, period) replica it lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableRef {
    pub kind: VarKind,
    pub element: usize,
    pub h: usize,
    pub t: usize,
}

impl fmt::Display for VariableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{},{}]", self.kind.name(), self.element, self.h, self.t)
    }
}

/// Constraint families, used for residual reporting and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ActiveBalance,
    ReactiveBalance,
    VoltageDrop,
    PccActive,
    PccReactive,
    Ramp,
    BatterySoc,
    TerminalSoc,
    ChargeLimit,
    DischargeLimit,
    Exclusivity,
    VoltageLimit,
    CurrentLimit,
    GenActive,
    GenReactive,
    EnergyLimit,
    ChargePower,
    DischargePower,
    BinaryBox,
    PowerCone,
    Fixing,
    Other,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ActiveBalance => "active_balance",
            Family::ReactiveBalance => "reactive_balance",
            Family::VoltageDrop => "voltage_drop",
            Family::PccActive => "pcc_active",
            Family::PccReactive => "pcc_reactive",
            Family::Ramp => "ramp",
            Family::BatterySoc => "battery_soc",
            Family::TerminalSoc => "terminal_soc",
            Family::ChargeLimit => "charge_limit",
            Family::DischargeLimit => "discharge_limit",
            Family::Exclusivity => "exclusivity",
            Family::VoltageLimit => "voltage_limit",
            Family::CurrentLimit => "current_limit",
            Family::GenActive => "gen_active",
            Family::GenReactive => "gen_reactive",
            Family::EnergyLimit => "energy_limit",
            Family::ChargePower => "charge_power",
            Family::DischargePower => "discharge_power",
            Family::BinaryBox => "binary_box",
            Family::PowerCone => "power_cone",
            Family::Fixing => "fixing",
            Family::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: VariableRef,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub family: Family,
}

/// Where a row came from; `h2` is the partner extreme point of a ramp row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowTag {
    pub element: usize,
    pub h: usize,
    pub t: usize,
    pub h2: Option<usize>,
}

/// `lower <= Σ coef·x <= upper`; equal bounds make an equality row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub family: Family,
    pub tag: RowTag,
    pub terms: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl LinearRow {
    pub fn eq(family: Family, tag: RowTag, terms: Vec<(VarId, f64)>, rhs: f64) -> Self {
        LinearRow {
            family,
            tag,
            terms,
            lower: rhs,
            upper: rhs,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Distance of `a·x` outside `[lower, upper]`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.value(x);
        (self.lower - v).max(v - self.upper).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// Σ tail² ≤ x·y with x, y ≥ 0.
    Rotated { x: VarId, y: VarId, tail: Vec<VarId> },
    /// ‖tail‖ ≤ radius.
    Norm { radius: f64, tail: Vec<VarId> },
}

impl Cone {
    /// How far the point is outside the cone, in squared-norm units for the
    /// rotated form and norm units otherwise.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Cone::Rotated { x: a, y: b, tail } => {
                let sq: f64 = tail.iter().map(|&j| x[j] * x[j]).sum();
                (sq - x[*a] * x[*b]).max(-x[*a]).max(-x[*b]).max(0.0)
            }
            Cone::Norm { radius, tail } => {
                let n = tail.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
                (n - radius).max(0.0)
            }
        }
    }
}

/// The exact relation l·v = p² + q² for one line replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearAudit {
    pub line: usize,
    pub h: usize,
    pub t: usize,
    pub l: VarId,
    pub v: VarId,
    pub p: VarId,
    pub q: VarId,
    /// Line resistance and reactance, used to price losses.
    pub r: f64,
    pub x: f64,
}

impl BilinearAudit {
    /// l·v − p² − q²; zero when the relaxation is tight.
    pub fn gap(&self, x: &[f64]) -> f64 {
        x[self.l] * x[self.v] - x[self.p] * x[self.p] - x[self.q] * x[self.q]
    }
}

/// Charge/discharge indicator pair of one battery replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryPair {
    pub battery: usize,
    pub h: usize,
    pub t: usize,
    pub uc: VarId,
    pub ud: VarId,
    pub pc: VarId,
    pub pd: VarId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelCounts {
    pub variables: usize,
    pub binaries: usize,
    pub rows: usize,
    pub cones: usize,
    pub audits: usize,
}

/// Worst constraint violation of an assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub amount: f64,
    pub family: Family,
}

#[derive(Debug, Clone, Default)]
pub struct OptimizationModel {
    pub variables: Vec<Variable>,
    pub rows: Vec<LinearRow>,
    pub cones: Vec<Cone>,
    pub audits: Vec<BilinearAudit>,
    pub binary_pairs: Vec<BinaryPair>,
    /// PCC coordinates of each polygon vertex, indexed `[t][h]`.
    pub vertices: Vec<Vec<(VarId, VarId)>>,
    pub layout: Option<Layout>,
    index: HashMap<VariableRef, VarId>,
}

impl OptimizationModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: VariableRef, lower: f64, upper: f64) -> VarId {
        let id = self.variables.len();
        let prev = self.index.insert(name, id);
        assert!(prev.is_none(), "variable {name} declared twice");
        self.variables.push(Variable {
            name,
            lower,
            upper,
            binary: name.kind.is_binary(),
            family: Family::Other,
        });
        id
    }

    pub fn var(&self, name: &VariableRef) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64, family: Family) {
        let v = &mut self.variables[id];
        v.lower = lower;
        v.upper = upper;
        v.family = family;
    }

    pub fn add_row(&mut self, row: LinearRow) {
        debug_assert!(row.terms.iter().all(|&(j, _)| j < self.variables.len()));
        self.rows.push(row);
    }

    pub fn add_cone(&mut self, cone: Cone) {
        self.cones.push(cone);
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn h_count(&self) -> usize {
        self.vertices.first().map_or(0, Vec::len)
    }

    pub fn t_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn counts(&self) -> ModelCounts {
        ModelCounts {
            variables: self.variables.len(),
            binaries: self.variables.iter().filter(|v| v.binary).count(),
            rows: self.rows.len(),
            cones: self.cones.len(),
            audits: self.audits.len(),
        }
    }

    pub fn row_count(&self, family: Family) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    /// PCC points of every vertex, `[t][h]`.
    pub fn vertex_values(&self, x: &[f64]) -> Vec<Vec<(f64, f64)>> {
        self.vertices
            .iter()
            .map(|row| row.iter().map(|&(p, q)| (x[p], x[q])).collect())
            .collect()
    }

    /// Worst violation over bounds, rows and cones, with `overrides` replacing
    /// the declared bounds of the listed variables.
    pub fn max_violation(&self, x: &[f64], overrides: &[(VarId, f64, f64)]) -> Violation {
        let mut worst = Violation {
            amount: 0.0,
            family: Family::Other,
        };
        let mut note = |amount: f64, family: Family| {
            if amount > worst.amount || amount.is_nan() {
                worst = Violation {
                    amount: if amount.is_nan() { f64::INFINITY } else { amount },
                    family,
                };
            }
        };
        let mut bounds: Vec<(f64, f64)> =
            self.variables.iter().map(|v| (v.lower, v.upper)).collect();
        for &(j, lo, hi) in overrides {
            bounds[j] = (lo, hi);
        }
        for (j, (v, (lo, hi))) in self.variables.iter().zip(bounds).enumerate() {
            note((lo - x[j]).max(x[j] - hi).max(0.0), v.family);
        }
        for r in &self.rows {
            note(r.violation(x), r.family);
        }
        for c in &self.cones {
            note(c.violation(x), Family::PowerCone);
        }
        worst
    }

    /// Plain-text listing, one constraint per line, for diffing models.
    pub fn listing(&self) -> String {
        listing::render(self)
    }
}
