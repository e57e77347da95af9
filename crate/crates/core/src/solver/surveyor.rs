use serde::{Deserialize, Serialize};

use super::{
    conic::solve_conic, directional_objective, fixing_overrides, Fixing,
    LossPrice, Objective, SolveError, SolveRequest, Solution, Status,
};
use crate::geometry::signed_area;
use crate::model::{Family, LinearRow, OptimizationModel, RowTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurveyorConfig {
    /// Initial trust radius as a fraction of the distance to the linearized
    /// optimum.
    pub damping: f64,
    /// Stop once an iteration improves the total area by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Radius halvings tried before giving up on an iteration.
    pub max_backtracks: usize,
    pub price: LossPrice,
    /// Largest relaxation gap an accepted iterate may have.
    pub max_gap: f64,
    /// Tenfold loss-price increases tried per radius when the gap is exceeded.
    pub max_price_raises: usize,
}

impl Default for SurveyorConfig {
    fn default() -> Self {
        SurveyorConfig {
            damping: 0.5,
            tolerance: 1e-6,
            max_iterations: 50,
            max_backtracks: 8,
            price: LossPrice::default(),
            max_gap: 1e-7,
            max_price_raises: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurveyorOutcome {
    pub solution: Solution,
    /// Total area of each accepted iterate, starting with the initial map.
    pub areas: Vec<f64>,
    /// Worst constraint violation of each accepted iterate.
    pub violations: Vec<f64>,
    pub iterations: usize,
}

fn total_area(model: &OptimizationModel, x: &[f64]) -> f64 {
    model.vertex_values(x).iter().map(|poly| signed_area(poly)).sum()
}

/// Gradient of the summed signed area with respect to every vertex.
fn area_gradient(model: &OptimizationModel, x: &[f64]) -> Vec<Vec<(f64, f64)>> {
    model
        .vertex_values(x)
        .iter()
        .map(|poly| {
            let n = poly.len();
            (0..n)
                .map(|h| {
                    let next = poly[(h + 1) % n];
                    let prev = poly[(h + n - 1) % n];
                    (0.5 * (next.1 - prev.1), 0.5 * (prev.0 - next.0))
                })
                .collect()
        })
        .collect()
}

fn pattern_of(model: &OptimizationModel, init: &Solution) -> Vec<Fixing> {
    if init.binary_fixing.len() == model.binary_pairs.len() {
        return init.binary_fixing.clone();
    }
    model
        .binary_pairs
        .iter()
        .map(|p| {
            if init.x[p.uc] > 0.5 {
                Fixing::Charge
            } else if init.x[p.ud] > 0.5 {
                Fixing::Discharge
            } else {
                Fixing::Idle
            }
        })
        .collect()
}

fn bound_row(var: usize, t: usize, lower: f64, upper: f64) -> LinearRow {
    LinearRow {
        family: Family::Other,
        tag: RowTag { element: var, h: 0, t, h2: None },
        terms: vec![(var, 1.0)],
        lower,
        upper,
    }
}

/// Successive convexification of the area objective starting at `init`.
///
/// Each iteration maximizes the area linearized at the current vertices
/// under a guard per period, inside an infinity-norm box around
/// the current vertices. The box starts at `damping` times the distance to
/// the unboxed optimum and halves until the area grows without shrinking any
/// single period. Every iterate is itself an optimal priced solve, so the
/// relaxation stays tight. Indicator patterns stay as in `init`.
pub fn maximize_surveyor(
    req: &SolveRequest<'_>,
    init: &Solution,
    cfg: &SurveyorConfig,
) -> Result<SurveyorOutcome, SolveError> {
    let model = req.model;
    if model.vertices.is_empty() {
        return Err(SolveError::NoVertices);
    }
    if !init.status.is_ok() {
        return Err(SolveError::InfeasibleInit(init.status));
    }
    let pattern = pattern_of(model, init);
    let mut base = req.fixed.clone();
    base.extend(fixing_overrides(model, &pattern));

    let mut best = init.clone();
    best.binary_fixing = pattern.clone();
    let mut area = total_area(model, &best.x);
    best.objective_value = area;
    let mut areas = vec![area];
    let mut violations = vec![model.max_violation(&best.x, &base).amount];
    let mut stats = init.stats;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let weights = area_gradient(model, &best.x);
        let current = model.vertex_values(&best.x);
        let current_areas: Vec<f64> = current.iter().map(|p| signed_area(p)).collect();
        let mut guards = req.extra_rows.clone();
        for (t, row) in model.vertices.iter().enumerate() {
            let mut terms = Vec::with_capacity(2 * row.len());
            let mut rhs = 0.0;
            for (h, &(p, q)) in row.iter().enumerate() {
                let (gp, gq) = weights[t][h];
                terms.push((p, gp));
                terms.push((q, gq));
                rhs += gp * current[t][h].0 + gq * current[t][h].1;
            }
            guards.push(LinearRow {
                family: Family::Other,
                tag: RowTag { element: 0, h: 0, t, h2: None },
                terms,
                lower: rhs,
                upper: f64::INFINITY,
            });
        }
        let lin = SolveRequest {
            objective: Objective::Linear(directional_objective(model, &weights, cfg.price)),
            fixed: base.clone(),
            extra_rows: guards,
            ..req.clone()
        };
        let target = solve_conic(&lin);
        stats.absorb(&target.stats);
        if !target.status.is_ok() {
            log::debug!("surveyor iter {iterations}: linearized solve {:?}", target.status);
            break;
        }
        let reach = model
            .vertex_values(&target.x)
            .iter()
            .flatten()
            .zip(current.iter().flatten())
            .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
            .fold(0.0, f64::max);

        let mut radius = cfg.damping * reach;
        let mut accepted = None;
        'shrink: for _ in 0..=cfg.max_backtracks {
            // Inside the box the exact area change of a period is the guard's
            // linear term plus the shoelace area of the displacement, which is
            // at most H·radius² in magnitude.
            let mut rows = lin.extra_rows.clone();
            for g in &mut rows[req.extra_rows.len()..] {
                g.lower += model.vertices[g.tag.t].len() as f64 * radius * radius;
            }
            for (t, (row, vals)) in model.vertices.iter().zip(&current).enumerate() {
                for (&(p, q), &(pv, qv)) in row.iter().zip(vals) {
                    rows.push(bound_row(p, t, pv - radius, pv + radius));
                    rows.push(bound_row(q, t, qv - radius, qv + radius));
                }
            }
            // Guard and box multipliers can make burning losses pay; raise the
            // loss price until the cones are tight again.
            let mut price = cfg.price;
            for _ in 0..=cfg.max_price_raises {
                let boxed = SolveRequest {
                    objective: Objective::Linear(directional_objective(model, &weights, price)),
                    extra_rows: rows.clone(),
                    ..lin.clone()
                };
                let s = solve_conic(&boxed);
                stats.absorb(&s.stats);
                if !s.status.is_ok() {
                    log::trace!("radius {radius:.3e}: {:?}", s.status);
                    break;
                }
                let gap = s.max_gap(model);
                if gap > cfg.max_gap {
                    log::trace!("radius {radius:.3e} margin {:.1e}: gap {gap:.3e}", price.margin);
                    price.margin *= 10.0;
                    continue;
                }
                let polys = model.vertex_values(&s.x);
                let cand_area: f64 = polys.iter().map(|p| signed_area(p)).sum();
                let no_loss =
                    polys.iter().zip(&current_areas).all(|(p, &a)| signed_area(p) >= a);
                if cand_area > area && no_loss {
                    accepted = Some((s, cand_area));
                    break 'shrink;
                }
                break;
            }
            radius *= 0.5;
        }
        let Some((s, cand_area)) = accepted else {
            log::debug!("surveyor iter {iterations}: no improving step");
            break;
        };
        let gain = cand_area - area;
        let viol = model.max_violation(&s.x, &base).amount;
        log::debug!("surveyor iter {iterations}: area {cand_area:.9} violation {viol:.3e}");
        best = Solution {
            objective_value: cand_area,
            binary_fixing: pattern.clone(),
            ..s
        };
        area = cand_area;
        areas.push(area);
        violations.push(viol);
        if gain < cfg.tolerance {
            break;
        }
    }
    best.stats = stats;
    best.status = if best.status == Status::Optimal { Status::Feasible } else { best.status };
    Ok(SurveyorOutcome { solution: best, areas, violations, iterations })
}
