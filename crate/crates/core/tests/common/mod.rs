//! Builders for small hand-made networks shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use flexmap::network::{Battery, Bus, DemandProfile, Generator, Line, Network, Units};
use flexmap::network::{DEFAULT_VMAX_SQ, DEFAULT_VMIN_SQ};

pub fn bus(id: usize) -> Bus {
    Bus { id, vmin_sq: DEFAULT_VMIN_SQ, vmax_sq: DEFAULT_VMAX_SQ, is_pcc: id == 1 }
}

pub fn line(from: usize, to: usize, r: f64, x: f64) -> Line {
    Line { from, to, r, x, imax_sq: None }
}

pub fn generator(bus: usize, pmax: f64, qmax: f64) -> Generator {
    Generator { bus, pmin: 0.0, pmax, qmin: -qmax, qmax, ramp_up: None, ramp_dn: None }
}

pub fn battery(bus: usize, emax: f64, e0: f64, power: f64, eta: f64) -> Battery {
    Battery { bus, emax, pc_max: power, pd_max: power, eta_c: eta, eta_d: eta, e0 }
}

/// Network over buses `1..=n` with the given lines and per-bus loads, every
/// bus present in the demand maps.
pub fn network(n: usize, lines: Vec<Line>, loads: &[(usize, f64, f64)], factors: Vec<f64>) -> Network {
    let mut base_p: BTreeMap<usize, f64> = (1..=n).map(|i| (i, 0.0)).collect();
    let mut base_q = base_p.clone();
    for &(id, p, q) in loads {
        base_p.insert(id, p);
        base_q.insert(id, q);
    }
    Network {
        base_mva: 1.0,
        units: Units::Pu,
        base_kv: None,
        buses: (1..=n).map(bus).collect(),
        lines,
        generators: Vec::new(),
        batteries: Vec::new(),
        demand: DemandProfile { base_p, base_q, factors, dt: 1.0 },
    }
}

/// Is the graph on `1..=n` with these edges a spanning tree? Union-find,
/// independent of the library's breadth-first check.
pub fn union_find_tree(n: usize, edges: &[(usize, usize)]) -> bool {
    if edges.len() + 1 != n {
        return false;
    }
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Smallest fixed point of the 2-bus DistFlow recursion from the sending end.
pub fn two_bus_fixed_point(r: f64, x: f64, pd: f64, qd: f64) -> (f64, f64, f64, f64) {
    let mut l = 0.0;
    for _ in 0..200 {
        let (p, q) = (pd + r * l, qd + x * l);
        l = p * p + q * q;
    }
    let (p, q) = (pd + r * l, qd + x * l);
    let v2 = 1.0 - 2.0 * (r * p + x * q) + (r * r + x * x) * l;
    (p, q, l, v2)
}

pub mod brute;
