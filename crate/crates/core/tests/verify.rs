mod common;

use std::collections::BTreeMap;

use common::{close, line, network};
use flexmap::baselines::minkowski_box;
use flexmap::dispatch::Dispatch;
use flexmap::model::{CouplingMode, Family};
use flexmap::network::validate_radial;
use flexmap::region::{map_csv, nominal_operation, read_map_csv, solve_linear_map, RegionConfig};
use flexmap::solver::{Limits, Tolerances};
use flexmap::verify::{
    audit_map, audit_vertices, check_residuals, feasibility_oracle, relaxation_gap, AuditConfig, OracleVerdict,
    Residuals,
};
use flexmap::{fixtures, Case, FlexibilityMap, Network};
use proptest::prelude::*;

fn case_map(case: Case, ramp: Option<f64>) -> (Network, FlexibilityMap) {
    let (net, options) = case.apply(&fixtures::five_bus(), ramp, CouplingMode::AllPairs);
    let map = solve_linear_map(&net, &RegionConfig { options, ..RegionConfig::default() }).unwrap();
    (net, map)
}

fn quick() -> AuditConfig {
    AuditConfig { trials: 10, seed: 3, ..AuditConfig::default() }
}

#[test]
fn solved_witnesses_have_clean_residuals() {
    let (net, map) = case_map(Case::III, Some(0.5));
    let r = check_residuals(&map, &net).unwrap();
    assert!(r.passes(1e-6), "{:?}", r.families);
    let (gap, _) = relaxation_gap(&map.dispatches, &net).unwrap();
    assert!(gap <= 1e-6);
}

#[test]
fn raised_voltage_shows_as_a_drop_residual() {
    let (net, mut map) = case_map(Case::III, Some(0.5));
    let base = check_residuals(&map, &net).unwrap().families[&Family::VoltageDrop];
    // A leaf bus touches a single line.
    let topo = validate_radial(&net).unwrap();
    let leaf = (0..net.buses.len()).rev().find(|&i| topo.children[i].is_empty()).unwrap();
    map.dispatches[0][2].v[leaf] += 0.01;
    let r = check_residuals(&map, &net).unwrap();
    let drop = r.families[&Family::VoltageDrop];
    assert!(close(drop, 0.01, 1e-6 + base), "{drop}");
    assert!(!r.passes(1e-6));
}

#[test]
fn inflated_current_shows_as_a_gap() {
    let (net, mut map) = case_map(Case::III, Some(0.5));
    let topo = validate_radial(&net).unwrap();
    let d = &mut map.dispatches[1][5];
    d.l[0] += 0.1;
    let from = topo.line_ends[0].0;
    let want = 0.1 * d.v[from];
    let (gap, at) = relaxation_gap(&map.dispatches, &net).unwrap();
    assert!(close(gap, want, 1e-6), "{gap} vs {want}");
    let at = at.unwrap();
    assert_eq!((at.line, at.h, at.t), (0, 5, 1));
}

#[test]
fn idle_line_has_no_gap() {
    let net = network(2, vec![line(1, 2, 0.01, 0.02)], &[], vec![1.0]);
    let d = Dispatch {
        v: vec![1.0, 1.0],
        l: vec![0.0],
        p_flow: vec![0.0],
        q_flow: vec![0.0],
        ..Dispatch::default()
    };
    assert_eq!(relaxation_gap(&[vec![d]], &net).unwrap().0, 0.0);
}

#[test]
fn oracle_accepts_nominal_and_rejects_outside_paths() {
    let (net, options) = Case::III.apply(&fixtures::five_bus(), Some(0.5), CouplingMode::AllPairs);
    let (model, sol) = nominal_operation(&net, options, Tolerances::default(), Limits::default()).unwrap();
    let nominal: Vec<_> = model.vertices.iter().map(|row| (sol.x[row[0].0], sol.x[row[0].1])).collect();
    let r = feasibility_oracle(&net, &options, &nominal, 1e-6).unwrap();
    assert_eq!(r.verdict, OracleVerdict::Feasible);
    assert_eq!(r.witness.len(), net.horizon());

    // Past the lossless device box in active power: nothing can reach it.
    let far: Vec<_> = (0..net.horizon())
        .map(|t| {
            let bb = minkowski_box(&net, t).bounding_box().unwrap();
            (bb.1 .0 + 1.0, nominal[t].1)
        })
        .collect();
    let r = feasibility_oracle(&net, &options, &far, 1e-6).unwrap();
    assert_eq!(r.verdict, OracleVerdict::Infeasible);
    assert!(r.deviation > 0.5);

    assert!(feasibility_oracle(&net, &options, &nominal[..1], 1e-6).is_err());
}

#[test]
fn zero_trials_audit_only_residuals() {
    let (net, map) = case_map(Case::III, Some(0.5));
    let report = audit_map(&map, &net, &AuditConfig { trials: 0, ..AuditConfig::default() }).unwrap();
    assert_eq!(report.vertex_paths.attempted, 0);
    assert_eq!(report.transitions.attempted, 0);
    assert_eq!(report.random_paths.attempted, 0);
    assert!(report.zigzag.is_none());
    assert!(report.verdicts.passed);
    assert!(report.summary().contains("pass"));
}

#[test]
fn tampered_vertex_fails_the_audit() {
    let (net, mut map) = case_map(Case::III, Some(0.5));
    map.periods[0][3].0 += 0.05;
    let report = audit_map(&map, &net, &AuditConfig { trials: 0, ..AuditConfig::default() }).unwrap();
    assert!(close(report.residuals.families[&Family::PccActive], 0.05, 1e-9));
    assert!(!report.verdicts.residuals && !report.verdicts.passed);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["verdicts"]["passed"], false);
}

#[test]
fn copper_plate_case_audit_passes() {
    let (net, options) = Case::I.apply(&fixtures::five_bus(), None, CouplingMode::AllPairs);
    let map = solve_linear_map(&net, &RegionConfig { options, ..RegionConfig::default() }).unwrap();
    let report = audit_map(&map, &net, &quick()).unwrap();
    assert!(report.verdicts.passed, "{}", report.summary());
    assert_eq!(report.transitions.attempted, 64);
    assert_eq!(report.random_paths.attempted, 10);
}

#[test]
fn vertices_from_csv_audit_like_the_map() {
    let (net, map) = case_map(Case::III, Some(0.5));
    let csv = read_map_csv(&map_csv(&map)).unwrap();
    let report = audit_vertices(&csv, &net, &map.metadata.options, &quick()).unwrap();
    assert!(report.verdicts.passed, "{}", report.summary());
    assert_eq!(report.vertex_paths.attempted, 8);
}

#[test]
fn nan_residual_never_passes() {
    let r = Residuals { families: BTreeMap::from([(Family::Ramp, 0.0), (Family::VoltageDrop, f64::NAN)]) };
    assert!(r.max().is_nan());
    assert!(!r.passes(f64::INFINITY));
}

proptest! {
    #[test]
    fn looser_tolerance_never_fails_more(values in prop::collection::vec(0.0f64..1.0, 1..6), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let families = [Family::ActiveBalance, Family::Ramp, Family::VoltageDrop, Family::BatterySoc, Family::PowerCone, Family::Other];
        let r = Residuals { families: families.iter().copied().zip(values).collect() };
        let (tight, loose) = (a.min(b), a.max(b));
        prop_assert!(!r.passes(tight) || r.passes(loose));
    }
}
