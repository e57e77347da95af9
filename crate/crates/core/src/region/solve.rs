use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{make_directions, FlexibilityMap, MapMetadata, ObjectiveKind, RegionError};
use crate::dispatch::Dispatch;
use crate::model::{assemble, assemble_replicas, AssemblyOptions, Family, OptimizationModel};
use crate::network::Network;
use crate::solver::{
    credited_objective, credited_value, directional_objective, fixing_overrides, loss_objective, Fixing,
    maximize_surveyor, solve_conic, solve_with_binaries, Limits, LossPrice, Objective, SolveRequest, Solution,
    Status, SurveyorConfig, Tolerances,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionConfig {
    pub h_count: usize,
    /// Angle of the first direction, radians.
    pub offset: f64,
    pub options: AssemblyOptions,
    pub price: LossPrice,
    pub surveyor: SurveyorConfig,
    pub tolerances: Tolerances,
    pub limits: Limits,
    /// Loss-credit rounds after the priced solve; zero keeps the priced
    /// vertices.
    pub credit_rounds: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            h_count: 8,
            offset: 0.0,
            options: AssemblyOptions::default(),
            price: LossPrice::default(),
            surveyor: SurveyorConfig::default(),
            tolerances: Tolerances::default(),
            limits: Limits::default(),
            credit_rounds: 30,
        }
    }
}

fn failure(stage: &'static str, s: &Solution) -> RegionError {
    match s.status {
        Status::Infeasible => RegionError::Infeasible { stage, diagnostic: s.diagnostic },
        status => RegionError::Solver { stage, status, diagnostic: s.diagnostic },
    }
}

/// Single operating trajectory with minimal losses and every coupling
/// active; proves the nominal demand is serviceable.
pub fn nominal_operation(
    net: &Network,
    options: AssemblyOptions,
    tolerances: Tolerances,
    limits: Limits,
) -> Result<(OptimizationModel, Solution), RegionError> {
    let model = assemble_replicas(net, 1, options)?;
    let req = SolveRequest::new(&model, Objective::Linear(loss_objective(&model)))
        .with_tolerances(tolerances)
        .with_limits(limits);
    let sol = solve_with_binaries(&req);
    if !sol.status.is_ok() {
        return Err(failure("nominal pre-solve", &sol));
    }
    Ok((model, sol))
}

/// Largest relaxation gap a loss-credit round may leave.
const CREDIT_GAP: f64 = 1e-7;
/// Loss-price multiple of the first credit round.
const CREDIT_SCALE: f64 = 2.0;
/// Doublings of the multiple tried when a round loosens the cones.
const CREDIT_RAISES: usize = 6;

/// Restart for a stalled credit loop: each replica takes the line state and
/// indicators of the sibling in its period that scores best along its own
/// direction. `None` when every replica already leads.
fn exchanged(model: &OptimizationModel, sol: &Solution, weights: &[Vec<(f64, f64)>]) -> Option<(Vec<f64>, Vec<Fixing>)> {
    let x = &sol.x;
    let mut source: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, row) in model.vertices.iter().enumerate() {
        for h in 0..row.len() {
            let w = weights[t][h];
            let score = |k: usize| w.0 * x[row[k].0] + w.1 * x[row[k].1];
            let top = (0..row.len()).max_by(|&i, &j| score(i).total_cmp(&score(j))).unwrap_or(h);
            if score(top) > score(h) + 1e-9 * (1.0 + score(h).abs()) {
                source.insert((h, t), top);
            }
        }
    }
    if source.is_empty() {
        return None;
    }
    let lines: HashMap<(usize, usize, usize), usize> =
        model.audits.iter().enumerate().map(|(k, a)| ((a.line, a.h, a.t), k)).collect();
    let mut lin = x.clone();
    for a in &model.audits {
        if let Some(&k) = source.get(&(a.h, a.t)).and_then(|&src| lines.get(&(a.line, src, a.t))) {
            let s = model.audits[k];
            for (dst, src) in [(a.p, s.p), (a.q, s.q), (a.v, s.v), (a.l, s.l)] {
                lin[dst] = x[src];
            }
        }
    }
    let pairs: HashMap<(usize, usize, usize), usize> =
        model.binary_pairs.iter().enumerate().map(|(k, b)| ((b.battery, b.h, b.t), k)).collect();
    let fixing = model
        .binary_pairs
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let src = source.get(&(b.h, b.t)).and_then(|&src| pairs.get(&(b.battery, src, b.t)));
            sol.binary_fixing[src.copied().unwrap_or(k)]
        })
        .collect();
    Some((lin, fixing))
}

/// Re-solve with losses credited at the previous answer, indicators held,
/// until the credited value stops improving. Losses are nonconvex to
/// maximize, so a stalled loop restarts from [`exchanged`] replicas. A
/// round that loosens the cones past [`CREDIT_GAP`] is retried with the price
/// doubled; a round that fails or loses value ends the loop.
fn credit_losses(req: &SolveRequest<'_>, weights: &[Vec<(f64, f64)>], cfg: &RegionConfig, mut sol: Solution) -> Solution {
    let model = req.model;
    if model.audits.is_empty() || !cfg.price.offset || cfg.credit_rounds == 0 {
        return sol;
    }
    let Objective::Linear(base) = &req.objective else {
        return sol;
    };
    let limit = CREDIT_GAP.max(sol.max_gap(model));
    let mut scale = CREDIT_SCALE;
    let mut raises = 0;
    let mut restart: Option<(Vec<f64>, Vec<Fixing>)> = None;
    for round in 0..cfg.credit_rounds {
        let value = credited_value(model, &sol.x, weights, cfg.price, scale);
        let (at, fixing) = match &restart {
            Some((x, f)) => (x.as_slice(), f.as_slice()),
            None => (sol.x.as_slice(), sol.binary_fixing.as_slice()),
        };
        let mut next = solve_conic(&SolveRequest {
            objective: Objective::Linear(credited_objective(model, at, weights, cfg.price, scale)),
            fixed: [req.fixed.clone(), fixing_overrides(model, fixing)].concat(),
            ..req.clone()
        });
        let restarted = restart.take();
        if !next.status.is_ok() {
            log::debug!("credit round {round}: status {:?}", next.status);
            break;
        }
        let gap = next.max_gap(model);
        if gap > limit {
            if raises == CREDIT_RAISES {
                log::debug!("credit round {round}: gap {gap:.3e} at price x{scale}");
                break;
            }
            raises += 1;
            scale *= 2.0;
            restart = restarted;
            continue;
        }
        let next_value = credited_value(model, &next.x, weights, cfg.price, scale);
        let gain = next_value - value;
        log::trace!("credit round {round}: value {next_value}, gain {gain:.3e}, gap {gap:.3e}, price x{scale}");
        if gain <= 1e-11 * (1.0 + value.abs()) {
            if restarted.is_some() {
                break;
            }
            match exchanged(model, &sol, weights) {
                Some(r) => restart = Some(r),
                None => break,
            }
            continue;
        }
        next.binary_fixing = match restarted {
            Some((_, f)) => f,
            None => std::mem::take(&mut sol.binary_fixing),
        };
        next.stats.absorb(&sol.stats);
        next.objective_value = base.iter().map(|&(j, v)| v * next.x[j]).sum();
        sol = next;
    }
    sol
}

/// One monolithic solve over every vertex and period.
pub fn solve_map(
    net: &Network,
    cfg: &RegionConfig,
    objective: ObjectiveKind,
) -> Result<FlexibilityMap, RegionError> {
    let start = Instant::now();
    let directions = make_directions(cfg.h_count, cfg.offset)?;
    nominal_operation(net, cfg.options, cfg.tolerances, cfg.limits)?;

    let model = assemble(net, cfg.h_count, cfg.options)?;
    let ramp_rows = model.row_count(Family::Ramp);
    if ramp_rows == 0 {
        log::info!("model has no ramp rows");
    }
    let weights: Vec<Vec<(f64, f64)>> = (0..model.t_count())
        .map(|_| (0..cfg.h_count).map(|h| directions.unit(h)).collect())
        .collect();
    let req = SolveRequest::new(
        &model,
        Objective::Linear(directional_objective(&model, &weights, cfg.price)),
    )
    .with_tolerances(cfg.tolerances)
    .with_limits(cfg.limits);
    let mut sol = solve_with_binaries(&req);
    if !sol.status.is_ok() {
        return Err(failure("map solve", &sol));
    }
    sol = credit_losses(&req, &weights, cfg, sol);
    let mut area_trace = Vec::new();
    if objective == ObjectiveKind::Surveyor {
        let sreq = SolveRequest { objective: Objective::Surveyor, ..req.clone() };
        let out = maximize_surveyor(&sreq, &sol, &cfg.surveyor)?;
        area_trace = out.areas;
        sol = out.solution;
    }

    let layout = model.layout.expect("assembled model has a layout");
    let periods = model.vertex_values(&sol.x);
    let dispatches = (0..layout.t_count)
        .map(|t| (0..layout.h_count).map(|h| Dispatch::from_assignment(&layout, &sol.x, h, t)).collect())
        .collect();
    let max_gap = sol.max_gap(&model);
    Ok(FlexibilityMap {
        directions,
        periods,
        dispatches,
        metadata: MapMetadata {
            h_count: cfg.h_count,
            t_count: layout.t_count,
            options: cfg.options,
            objective,
            loss_price: cfg.price,
            stats: sol.stats,
            wall_time_s: start.elapsed().as_secs_f64(),
            objective_value: sol.objective_value,
            area_trace,
            max_gap,
            ramp_rows,
        },
    })
}

pub fn solve_linear_map(net: &Network, cfg: &RegionConfig) -> Result<FlexibilityMap, RegionError> {
    solve_map(net, cfg, ObjectiveKind::Linear)
}

/// Linear map refined by successive convexification of the area objective.
pub fn solve_surveyor_map(net: &Network, cfg: &RegionConfig) -> Result<FlexibilityMap, RegionError> {
    solve_map(net, cfg, ObjectiveKind::Surveyor)
}

pub fn extract_dispatch(map: &FlexibilityMap, h: usize, t: usize) -> Result<&Dispatch, RegionError> {
    map.dispatches
        .get(t)
        .and_then(|row| row.get(h))
        .ok_or(RegionError::OutOfRange { h, t })
}
