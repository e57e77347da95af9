//! Solvers for assembled models: the convex conic program, exact search over
//! battery indicators, and successive convexification of the area objective.

mod binaries;
mod conic;
mod surveyor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Family, LinearRow, OptimizationModel, VarId, VariableRef};

pub use binaries::solve_with_binaries;
pub use conic::solve_conic;
pub use surveyor::{maximize_surveyor, SurveyorConfig, SurveyorOutcome};

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximize `Σ coef·x`.
    Linear(Vec<(VarId, f64)>),
    /// Maximize the summed signed polygon area over all periods.
    Surveyor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest accepted bound, row or cone violation.
    pub feasibility: f64,
    /// Interior-point gap and residual target.
    pub optimality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feasibility: 1e-6, optimality: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_iterations: u32,
    pub time_limit_s: f64,
    /// Node cap of the indicator search.
    pub max_nodes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_iterations: 400, time_limit_s: f64::INFINITY, max_nodes: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveRequest<'a> {
    pub model: &'a OptimizationModel,
    pub objective: Objective,
    /// Accepted for interface completeness; the interior-point backend always
    /// starts from its own central point.
    pub warm_start: Option<Vec<f64>>,
    pub tolerances: Tolerances,
    pub limits: Limits,
    /// Bound overrides `(var, lower, upper)` applied on top of the model.
    pub fixed: Vec<(VarId, f64, f64)>,
    /// Rows added to the model for this solve only.
    pub extra_rows: Vec<LinearRow>,
}

impl<'a> SolveRequest<'a> {
    pub fn new(model: &'a OptimizationModel, objective: Objective) -> Self {
        SolveRequest {
            model,
            objective,
            warm_start: None,
            tolerances: Tolerances::default(),
            limits: Limits::default(),
            fixed: Vec::new(),
            extra_rows: Vec::new(),
        }
    }

    pub fn with_fixed(mut self, fixed: Vec<(VarId, f64, f64)>) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    IterationLimit,
}

impl Status {
    pub fn is_ok(self) -> bool {
        matches!(self, Status::Optimal | Status::Feasible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixing {
    Idle,
    Charge,
    Discharge,
}

impl Fixing {
    pub fn indicators(self) -> (f64, f64) {
        match self {
            Fixing::Idle => (0.0, 0.0),
            Fixing::Charge => (1.0, 0.0),
            Fixing::Discharge => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: u32,
    pub solve_time_s: f64,
    pub conic_solves: usize,
    pub nodes: usize,
}

impl SolveStats {
    pub fn absorb(&mut self, other: &SolveStats) {
        self.iterations += other.iterations;
        self.solve_time_s += other.solve_time_s;
        self.conic_solves += other.conic_solves;
        self.nodes += other.nodes;
    }
}

/// Worst violated constraint family, reported with infeasible or failed solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub family: Family,
    pub amount: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Value of every model variable, indexed by `VarId`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: Status,
    /// Indicator pattern per entry of `model.binary_pairs`.
    pub binary_fixing: Vec<Fixing>,
    pub stats: SolveStats,
    pub diagnostic: Option<Diagnostic>,
}

impl Solution {
    pub fn value(&self, model: &OptimizationModel, name: &VariableRef) -> Option<f64> {
        model.var(name).map(|j| self.x[j])
    }

    pub fn max_gap(&self, model: &OptimizationModel) -> f64 {
        model.audits.iter().map(|a| a.gap(&self.x)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("initial solution is not feasible (status {0:?})")]
    InfeasibleInit(Status),
    #[error("model has no polygon vertices")]
    NoVertices,
}

/// Bound overrides that pin each indicator pair to `fixing`.
pub fn fixing_overrides(model: &OptimizationModel, fixing: &[Fixing]) -> Vec<(VarId, f64, f64)> {
    model
        .binary_pairs
        .iter()
        .zip(fixing)
        .flat_map(|(pair, f)| {
            let (uc, ud) = f.indicators();
            [(pair.uc, uc, uc), (pair.ud, ud, ud)]
        })
        .collect()
}

/// Pricing of line losses attached to a directional objective.
///
/// A replica maximizing `w·(p_pcc, q_pcc)` gains `r·w_p + x·w_q` per unit of
/// spurious current in the relaxed model; with `offset` the price removes that
/// gain, and `margin·|z|·|w|` comes on top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPrice {
    pub margin: f64,
    #[serde(default = "yes")]
    pub offset: bool,
}

fn yes() -> bool {
    true
}

impl Default for LossPrice {
    fn default() -> Self {
        LossPrice { margin: 1e-2, offset: true }
    }
}

impl LossPrice {
    /// Plain directional objective, losses unpriced.
    pub const NONE: LossPrice = LossPrice { margin: 0.0, offset: false };

    pub fn coefficient(&self, r: f64, x: f64, w: (f64, f64)) -> f64 {
        let norm = w.0.hypot(w.1);
        let gain = if self.offset { (r * w.0 + x * w.1).max(0.0) } else { 0.0 };
        gain + self.margin * r.hypot(x) * norm
    }
}

/// Linear objective maximizing `Σ w[t][h]·vertex(h, t)` minus priced losses.
pub fn directional_objective(
    model: &OptimizationModel,
    weights: &[Vec<(f64, f64)>],
    price: LossPrice,
) -> Vec<(VarId, f64)> {
    let mut c = Vec::new();
    for (t, row) in model.vertices.iter().enumerate() {
        for (h, &(p, q)) in row.iter().enumerate() {
            let w = weights[t][h];
            c.push((p, w.0));
            c.push((q, w.1));
        }
    }
    for a in &model.audits {
        let w = weights[a.t][a.h];
        c.push((a.l, -price.coefficient(a.r, a.x, w)));
    }
    c
}

/// Directional objective with losses priced at `scale` times `price`, plus
/// the linearization at `x` of the priced current `Σ ρ·(p² + q²)/v`: a credit
/// that hands back the physical loss gain the price removed.
///
/// `(p² + q²)/v` is convex, so this objective lies below
/// [`credited_value`] and touches it at `x`. Maximizing it repeatedly never
/// lowers that value, and a fixed point reached with tight cones is
/// stationary for the directional objective on exact power flows.
pub fn credited_objective(
    model: &OptimizationModel,
    x: &[f64],
    weights: &[Vec<(f64, f64)>],
    price: LossPrice,
    scale: f64,
) -> Vec<(VarId, f64)> {
    let mut c = directional_objective(model, weights, LossPrice::NONE);
    for a in &model.audits {
        let rho = scale * price.coefficient(a.r, a.x, weights[a.t][a.h]);
        let v = x[a.v];
        if rho == 0.0 || v <= 0.0 {
            continue;
        }
        let (p, q) = (x[a.p], x[a.q]);
        c.push((a.l, -rho));
        c.push((a.p, rho * 2.0 * p / v));
        c.push((a.q, rho * 2.0 * q / v));
        c.push((a.v, -rho * (p * p + q * q) / (v * v)));
    }
    c
}

/// `Σ w·vertex − Σ ρ·(l − (p² + q²)/v)` at `x`, with `ρ` as in
/// [`credited_objective`].
pub fn credited_value(
    model: &OptimizationModel,
    x: &[f64],
    weights: &[Vec<(f64, f64)>],
    price: LossPrice,
    scale: f64,
) -> f64 {
    let mut total = 0.0;
    for (t, row) in model.vertices.iter().enumerate() {
        for (h, &(p, q)) in row.iter().enumerate() {
            let w = weights[t][h];
            total += w.0 * x[p] + w.1 * x[q];
        }
    }
    for a in &model.audits {
        let rho = scale * price.coefficient(a.r, a.x, weights[a.t][a.h]);
        let current = (x[a.p] * x[a.p] + x[a.q] * x[a.q]) / x[a.v].max(f64::MIN_POSITIVE);
        total -= rho * (x[a.l] - current);
    }
    total
}

/// Objective minimizing `Σ |z|·l`, used to pick an exact dispatch once the
/// PCC exchange is pinned.
pub fn loss_objective(model: &OptimizationModel) -> Vec<(VarId, f64)> {
    model.audits.iter().map(|a| (a.l, -a.r.hypot(a.x))).collect()
}
