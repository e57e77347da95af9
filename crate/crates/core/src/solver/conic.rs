use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Diagnostic, Objective, SolveRequest, SolveStats, Solution, Status};
use crate::model::{Cone, Family};

/// Rows of `A x + s = b` grouped by cone, with the family of each row kept
/// for infeasibility diagnostics.
#[derive(Default)]
struct Program {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    family: Vec<Family>,
}

impl Program {
    fn push(&mut self, terms: &[(usize, f64)], rhs: f64, family: Family) {
        let i = self.b.len();
        for &(j, c) in terms {
            self.rows.push(i);
            self.cols.push(j);
            self.vals.push(c);
        }
        self.b.push(rhs);
        self.family.push(family);
    }
}

fn negated(terms: &[(usize, f64)]) -> Vec<(usize, f64)> {
    terms.iter().map(|&(j, c)| (j, -c)).collect()
}

/// Solve the convex relaxation of `req.model` with a linear objective.
/// Indicator variables that are not pinned by `req.fixed` are treated as
/// continuous on [0, 1].
pub fn solve_conic(req: &SolveRequest<'_>) -> Solution {
    let model = req.model;
    let n = model.len();
    let c = match &req.objective {
        Objective::Linear(c) => c.clone(),
        Objective::Surveyor => panic!("solve_conic needs a linear objective"),
    };

    let mut bounds: Vec<(f64, f64, Family)> =
        model.variables.iter().map(|v| (v.lower, v.upper, v.family)).collect();
    for &(j, lo, hi) in &req.fixed {
        bounds[j].0 = lo;
        bounds[j].1 = hi;
    }

    let rows: Vec<&crate::model::LinearRow> = model.rows.iter().chain(&req.extra_rows).collect();
    let mut prog = Program::default();
    for r in &rows {
        if r.lower == r.upper {
            prog.push(&r.terms, r.upper, r.family);
        }
    }
    for (j, &(lo, hi, fam)) in bounds.iter().enumerate() {
        if lo == hi {
            prog.push(&[(j, 1.0)], hi, fam);
        }
    }
    let zero = prog.b.len();
    for r in &rows {
        if r.lower != r.upper {
            if r.upper.is_finite() {
                prog.push(&r.terms, r.upper, r.family);
            }
            if r.lower.is_finite() {
                prog.push(&negated(&r.terms), -r.lower, r.family);
            }
        }
    }
    for (j, &(lo, hi, fam)) in bounds.iter().enumerate() {
        if lo != hi {
            if hi.is_finite() {
                prog.push(&[(j, 1.0)], hi, fam);
            }
            if lo.is_finite() {
                prog.push(&[(j, -1.0)], -lo, fam);
            }
        }
    }
    let nonneg = prog.b.len() - zero;
    let mut cones = Vec::new();
    if zero > 0 {
        cones.push(SupportedConeT::ZeroConeT(zero));
    }
    if nonneg > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(nonneg));
    }
    for cone in &model.cones {
        match cone {
            Cone::Rotated { x, y, tail } => {
                // (x + y, x − y, 2·tail) in the standard second-order cone.
                prog.push(&[(*x, -1.0), (*y, -1.0)], 0.0, Family::PowerCone);
                prog.push(&[(*x, -1.0), (*y, 1.0)], 0.0, Family::PowerCone);
                for &j in tail {
                    prog.push(&[(j, -2.0)], 0.0, Family::PowerCone);
                }
                cones.push(SupportedConeT::SecondOrderConeT(2 + tail.len()));
            }
            Cone::Norm { radius, tail } => {
                prog.push(&[], *radius, Family::PowerCone);
                for &j in tail {
                    prog.push(&[(j, -1.0)], 0.0, Family::PowerCone);
                }
                cones.push(SupportedConeT::SecondOrderConeT(1 + tail.len()));
            }
        }
    }

    let m = prog.b.len();
    let a = CscMatrix::new_from_triplets(m, n, prog.rows, prog.cols, prog.vals);
    let p = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(j, v) in &c {
        q[j] -= v;
    }
    let objective_of = |x: &[f64]| c.iter().map(|&(j, v)| v * x[j]).sum::<f64>();
    let setup_failure = |e: &dyn std::fmt::Display| {
        log::warn!("conic setup failed: {e}");
        Solution {
            x: vec![0.0; n],
            objective_value: f64::NAN,
            status: Status::IterationLimit,
            binary_fixing: Vec::new(),
            stats: SolveStats::default(),
            diagnostic: None,
        }
    };
    // Tight tolerances first; a stall on a degenerate problem is retried at
    // the solver's stock accuracy, then with a looser fallback gap so a
    // stalled but primal-feasible iterate is reported as almost solved.
    let tight = req.tolerances.optimality;
    let mut iterations = 0;
    let mut solve_time_s = 0.0;
    let mut solver = None;
    let stock = tight.max(1e-8);
    let attempts: [(f64, f64); 3] = [(tight, 1e-7), (stock, 1e-7), (stock, 1e-6)];
    for (k, &(tol, fallback)) in attempts.iter().enumerate() {
        if k == 1 && tol == tight {
            continue;
        }
        let settings = DefaultSettings {
            verbose: log::log_enabled!(log::Level::Trace),
            max_iter: req.limits.max_iterations,
            time_limit: req.limits.time_limit_s,
            tol_gap_abs: tol,
            tol_gap_rel: tol,
            tol_feas: tol.min(1e-8),
            tol_ktratio: 1e-8_f64.max(tol),
            reduced_tol_gap_abs: fallback.max(tol),
            reduced_tol_gap_rel: fallback.max(tol),
            reduced_tol_feas: 1e-7_f64.max(tol),
            ..DefaultSettings::default()
        };
        let mut s = match DefaultSolver::new(&p, &q, &a, &prog.b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return setup_failure(&e),
        };
        s.solve();
        iterations += s.solution.iterations;
        solve_time_s += s.solution.solve_time;
        let settled = matches!(
            s.solution.status,
            SolverStatus::Solved
                | SolverStatus::PrimalInfeasible
                | SolverStatus::DualInfeasible
                | SolverStatus::MaxTime
        );
        if !settled {
            log::debug!("conic solve at tolerance {tol:.0e}, fallback gap {fallback:.0e} ended with {:?}", s.solution.status);
        }
        solver = Some(s);
        if settled {
            break;
        }
    }
    let solver = solver.expect("at least one attempt");
    let sol = &solver.solution;
    let x = sol.x.clone();
    let stats = SolveStats {
        iterations,
        solve_time_s,
        conic_solves: 1,
        nodes: 0,
    };
    let mut worst = model.max_violation(&x, &req.fixed);
    for r in &req.extra_rows {
        let v = r.violation(&x);
        if v > worst.amount {
            worst = crate::model::Violation { amount: v, family: r.family };
        }
    }
    let within = worst.amount <= req.tolerances.feasibility;
    let as_diag = |v: crate::model::Violation| Diagnostic { family: v.family, amount: v.amount };
    let (status, diagnostic) = match sol.status {
        SolverStatus::Solved if within => (Status::Optimal, None),
        SolverStatus::AlmostSolved if within => (Status::Feasible, None),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            // The largest dual multiplier of the certificate marks the row
            // family that blocks feasibility.
            let (row, amount) = sol
                .z
                .iter()
                .enumerate()
                .map(|(i, z)| (i, z.abs()))
                .fold((0, 0.0), |acc, e| if e.1 > acc.1 { e } else { acc });
            let family = prog.family.get(row).copied().unwrap_or(Family::Other);
            (Status::Infeasible, Some(Diagnostic { family, amount }))
        }
        other => {
            log::debug!("conic solve ended with {other:?}, worst violation {:.3e}", worst.amount);
            (Status::IterationLimit, Some(as_diag(worst)))
        }
    };
    Solution {
        objective_value: objective_of(&x),
        x,
        status,
        binary_fixing: Vec::new(),
        stats,
        diagnostic,
    }
}
