use super::{
    conic::solve_conic, fixing_overrides, Fixing, Objective, SolveRequest, SolveStats, Solution,
    Status,
};
use crate::model::{Family, LinearRow, OptimizationModel, RowTag, VarId};

/// Battery power below this counts as zero when testing complementarity.
const ACTIVE: f64 = 1e-7;

fn node_overrides(
    model: &OptimizationModel,
    base: &[(VarId, f64, f64)],
    fixed: &[Option<Fixing>],
) -> Vec<(VarId, f64, f64)> {
    let mut out = base.to_vec();
    for (pair, f) in model.binary_pairs.iter().zip(fixed) {
        if let Some(f) = f {
            let (uc, ud) = f.indicators();
            out.push((pair.uc, uc, uc));
            out.push((pair.ud, ud, ud));
        }
    }
    out
}

struct Search<'a, 'b> {
    req: &'a SolveRequest<'b>,
    incumbent: Option<Solution>,
    stats: SolveStats,
    exhausted: bool,
    /// A node ended without a verdict, so its subtree is unexplored.
    unresolved: bool,
}

impl Search<'_, '_> {
    fn bound_gap(&self) -> f64 {
        self.req.tolerances.optimality.max(1e-9)
    }

    fn visit(&mut self, fixed: &mut Vec<Option<Fixing>>) {
        if self.stats.nodes >= self.req.limits.max_nodes {
            self.exhausted = true;
            return;
        }
        self.stats.nodes += 1;
        let model = self.req.model;
        let overrides = node_overrides(model, &self.req.fixed, fixed);
        let node_req = SolveRequest { fixed: overrides, ..self.req.clone() };
        let relaxed = solve_conic(&node_req);
        self.stats.absorb(&relaxed.stats);
        log::trace!(
            "node {} depth {} status {:?} bound {:.9} incumbent {:?}",
            self.stats.nodes,
            fixed.iter().filter(|f| f.is_some()).count(),
            relaxed.status,
            relaxed.objective_value,
            self.incumbent.as_ref().map(|s| s.objective_value)
        );
        if !relaxed.status.is_ok() {
            self.unresolved |= relaxed.status != Status::Infeasible;
            return;
        }
        if let Some(best) = &self.incumbent {
            let slack = self.bound_gap() * (1.0 + best.objective_value.abs());
            if relaxed.objective_value <= best.objective_value + slack {
                return;
            }
        }

        let simultaneous = |x: &[f64], k: usize| {
            let p = &model.binary_pairs[k];
            fixed[k].is_none() && x[p.pc] > ACTIVE && x[p.pd] > ACTIVE
        };
        let relaxed = if (0..fixed.len()).any(|k| simultaneous(&relaxed.x, k)) {
            self.purify(relaxed, &node_req)
        } else {
            relaxed
        };
        let branch = (0..fixed.len()).find(|&k| simultaneous(&relaxed.x, k));
        match branch {
            Some(k) => {
                for f in [Fixing::Charge, Fixing::Discharge] {
                    fixed[k] = Some(f);
                    self.visit(fixed);
                }
                fixed[k] = None;
            }
            None => self.accept(relaxed, fixed),
        }
    }

    /// Interior-point solutions sit at the centre of the optimal face, where
    /// batteries that do not affect the objective charge and discharge at
    /// once. Re-solve over the optimal face for least battery throughput so
    /// only pairs whose simultaneous operation pays off remain.
    fn purify(&mut self, relaxed: Solution, node_req: &SolveRequest<'_>) -> Solution {
        let model = self.req.model;
        let Objective::Linear(c) = &self.req.objective else {
            return relaxed;
        };
        let floor = relaxed.objective_value - self.bound_gap() * (1.0 + relaxed.objective_value.abs());
        let mut extra = node_req.extra_rows.clone();
        extra.push(LinearRow {
            family: Family::Other,
            tag: RowTag::default(),
            terms: c.clone(),
            lower: floor,
            upper: f64::INFINITY,
        });
        let throughput = model
            .binary_pairs
            .iter()
            .flat_map(|p| [(p.pc, -1.0), (p.pd, -1.0)])
            .collect();
        let face = SolveRequest {
            objective: Objective::Linear(throughput),
            extra_rows: extra,
            ..node_req.clone()
        };
        let s = solve_conic(&face);
        self.stats.absorb(&s.stats);
        if !s.status.is_ok() {
            return relaxed;
        }
        let value = c.iter().map(|&(j, v)| v * s.x[j]).sum();
        Solution { objective_value: value, ..s }
    }

    /// Complementary relaxed point: round the free indicators and keep it if
    /// the rounded assignment stays feasible, else re-solve with them pinned.
    fn accept(&mut self, relaxed: Solution, fixed: &[Option<Fixing>]) {
        let model = self.req.model;
        let pattern: Vec<Fixing> = model
            .binary_pairs
            .iter()
            .zip(fixed)
            .map(|(p, f)| {
                f.unwrap_or(if relaxed.x[p.pc] > ACTIVE {
                    Fixing::Charge
                } else if relaxed.x[p.pd] > ACTIVE {
                    Fixing::Discharge
                } else {
                    Fixing::Idle
                })
            })
            .collect();
        let mut overrides = self.req.fixed.clone();
        overrides.extend(fixing_overrides(model, &pattern));
        let mut x = relaxed.x.clone();
        for &(j, v, _) in &overrides[self.req.fixed.len()..] {
            x[j] = v;
        }
        let mut candidate = if model.max_violation(&x, &overrides).amount
            <= self.req.tolerances.feasibility
        {
            Solution { x, ..relaxed }
        } else {
            let pinned = SolveRequest { fixed: overrides, ..self.req.clone() };
            let s = solve_conic(&pinned);
            self.stats.absorb(&s.stats);
            if !s.status.is_ok() {
                self.unresolved |= s.status != Status::Infeasible;
                return;
            }
            s
        };
        candidate.binary_fixing = pattern;
        let better = self
            .incumbent
            .as_ref()
            .is_none_or(|b| candidate.objective_value > b.objective_value);
        if better {
            self.incumbent = Some(candidate);
        }
    }
}

/// Exact optimum over the charge/discharge indicators by depth-first search.
///
/// Pairs are branched in chronological order, charge first. A node whose
/// relaxation is already complementary is closed without branching; idle is
/// covered by both children.
pub fn solve_with_binaries(req: &SolveRequest<'_>) -> Solution {
    let model = req.model;
    if model.binary_pairs.is_empty() {
        return solve_conic(req);
    }
    let mut search = Search { req, incumbent: None, stats: SolveStats::default(), exhausted: false, unresolved: false };
    let mut fixed = vec![None; model.binary_pairs.len()];
    search.visit(&mut fixed);
    let stats = search.stats;
    log::debug!("indicator search: {} nodes, {} conic solves", stats.nodes, stats.conic_solves);
    match search.incumbent {
        Some(mut s) => {
            s.stats = stats;
            if search.exhausted {
                s.status = Status::IterationLimit;
            } else if search.unresolved {
                s.status = Status::Feasible;
            }
            s
        }
        None => {
            // Report the root relaxation's diagnostic.
            let mut root = solve_conic(req);
            root.stats = stats;
            root.status = if search.exhausted || search.unresolved {
                Status::IterationLimit
            } else {
                Status::Infeasible
            };
            root
        }
    }
}
