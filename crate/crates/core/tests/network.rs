mod common;

use common::{generator, line, network, union_find_tree};
use flexmap::fixtures;
use flexmap::network::{load_network, to_per_unit, to_physical, validate_radial, NetworkError};
use proptest::prelude::*;

#[test]
fn five_bus_fixture_matches_stated_aggregates() {
    let net = fixtures::five_bus();
    assert_eq!(net.buses.len(), 5);
    assert_eq!(net.lines.len(), 4);
    assert_eq!(net.generators.len(), 3);
    assert_eq!(net.batteries.len(), 2);
    let capacity: f64 = net.generators.iter().map(|g| g.pmax).sum();
    assert!((capacity - 1.5).abs() < 1e-12);
    // 200 kWh on a 1 MVA base.
    let storage: f64 = net.batteries.iter().map(|b| b.emax).sum();
    assert!((storage - 0.2).abs() < 1e-12);
    let (p, q) = net.total_demand(0);
    assert!((p - 1.3).abs() < 1e-12 && (q - 0.427).abs() < 1e-12);
}

#[test]
fn physical_demand_scales_by_base() {
    let mut raw = network(2, vec![line(1, 2, 0.01, 0.01)], &[(2, 1.3, 0.427)], vec![1.0]);
    raw.units = flexmap::network::Units::Physical;
    let pu = to_per_unit(&raw, 1.0, 10.0).unwrap();
    assert_eq!(pu.demand.base_p[&2], 1.3);
    let pu = to_per_unit(&raw, 10.0, 10.0).unwrap();
    assert!((pu.demand.base_q[&2] - 0.0427).abs() < 1e-15);
}

#[test]
fn four_buses_two_lines_is_disconnected() {
    let net = network(4, vec![line(1, 2, 0.01, 0.01), line(3, 4, 0.01, 0.01)], &[], vec![1.0]);
    assert!(matches!(net.validate(), Err(NetworkError::Disconnected(_))));
}

#[test]
fn every_fixture_round_trips() {
    for net in [
        fixtures::five_bus(),
        fixtures::five_bus_profile(),
        fixtures::copper_plate(),
        fixtures::two_bus(),
        fixtures::feeder141(),
    ] {
        let back = load_network(&net.to_json()).unwrap();
        assert_eq!(back, net);
        let topo = validate_radial(&net).unwrap();
        let edges: Vec<(usize, usize)> = net.lines.iter().map(|l| (l.from, l.to)).collect();
        let ids: Vec<usize> = net.buses.iter().map(|b| b.id).collect();
        let dense: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(a, b)| (1 + ids.iter().position(|&i| i == a).unwrap(), 1 + ids.iter().position(|&i| i == b).unwrap()))
            .collect();
        assert!(union_find_tree(ids.len(), &dense));
        assert_eq!(topo.order.len(), net.buses.len());
    }
}

/// Random tree on `1..=n`: bus `k` hangs off an earlier bus.
fn tree(max: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max).prop_flat_map(|n| {
        let parents: Vec<_> = (2..=n).map(|k| 1..k).collect();
        (Just(n), parents).prop_map(|(n, ps)| (n, ps.into_iter().enumerate().map(|(i, p)| (p, i + 2)).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialized_networks_parse_back_identically(
        (n, edges) in tree(12),
        r in 0.001f64..0.1,
        load in 0.0f64..2.0,
        factors in prop::collection::vec(0.5f64..1.5, 1..6),
    ) {
        let lines = edges.iter().map(|&(a, b)| line(a, b, r, 2.0 * r)).collect();
        let mut net = network(n, lines, &[(n, load, 0.3 * load)], factors);
        net.generators.push(generator(n, 0.5, 0.2));
        net.generators[0].ramp_up = Some(0.1);
        net.batteries.push(common::battery(2, 0.1, 0.05, 0.02, 0.95));
        net.validate().unwrap();
        let back = load_network(&net.to_json()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn per_unit_scaling_inverts(
        p in -1e3f64..1e3,
        z in 1e-4f64..1e2,
        e in 0.0f64..1e3,
        base_mva in 0.1f64..100.0,
        base_kv in 0.4f64..220.0,
    ) {
        let mut raw = network(2, vec![line(1, 2, z, 0.5 * z)], &[(2, p, -p)], vec![1.0]);
        raw.lines[0].imax_sq = Some(z);
        raw.generators.push(flexmap::network::Generator { pmin: -p.abs(), pmax: p.abs(), ramp_up: Some(e), ..generator(2, 0.0, p.abs()) });
        raw.batteries.push(common::battery(2, e, 0.5 * e, z, 1.0));
        let back = to_physical(&to_per_unit(&raw, base_mva, base_kv).unwrap(), base_mva, base_kv).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        prop_assert!(rel(back.demand.base_p[&2], p) && rel(back.demand.base_q[&2], -p));
        prop_assert!(rel(back.lines[0].r, z) && rel(back.lines[0].x, 0.5 * z));
        prop_assert!(rel(back.lines[0].imax_sq.unwrap(), z));
        let g = &back.generators[0];
        prop_assert!(rel(g.pmax, p.abs()) && rel(g.qmin, -p.abs()) && rel(g.ramp_up.unwrap(), e));
        let b = &back.batteries[0];
        prop_assert!(rel(b.emax, e) && rel(b.e0, 0.5 * e) && rel(b.pc_max, z));
    }

    #[test]
    fn radial_check_agrees_with_union_find(
        n in 2usize..9,
        raw in prop::collection::vec((1usize..9, 1usize..9), 0..10),
    ) {
        let edges: Vec<(usize, usize)> = raw
            .into_iter()
            .map(|(a, b)| (1 + (a - 1) % n, 1 + (b - 1) % n))
            .filter(|(a, b)| a != b)
            .collect();
        // Duplicate (from, to) pairs are a separate validation error.
        let mut seen = std::collections::BTreeSet::new();
        let edges: Vec<_> = edges.into_iter().filter(|e| seen.insert(*e)).collect();
        let net = network(n, edges.iter().map(|&(a, b)| line(a, b, 0.01, 0.01)).collect(), &[], vec![1.0]);
        prop_assert_eq!(validate_radial(&net).is_ok(), union_find_tree(n, &edges));
        prop_assert_eq!(net.validate().is_ok(), union_find_tree(n, &edges));
    }
}
