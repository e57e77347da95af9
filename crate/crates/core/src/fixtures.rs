//! Shipped networks and the synthetic large feeder.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{
    load_network, Bus, DemandProfile, Generator, Line, Network, Units, DEFAULT_VMAX_SQ,
    DEFAULT_VMIN_SQ,
};

pub const FIVE_BUS: &str = include_str!("../fixtures/five_bus.json");
pub const FIVE_BUS_PROFILE: &str = include_str!("../fixtures/five_bus_profile.json");
pub const COPPER_PLATE: &str = include_str!("../fixtures/copper_plate.json");
pub const TWO_BUS: &str = include_str!("../fixtures/two_bus.json");

pub fn five_bus() -> Network {
    load_network(FIVE_BUS).expect("shipped fixture is valid")
}

pub fn five_bus_profile() -> Network {
    load_network(FIVE_BUS_PROFILE).expect("shipped fixture is valid")
}

pub fn copper_plate() -> Network {
    load_network(COPPER_PLATE).expect("shipped fixture is valid")
}

pub fn two_bus() -> Network {
    load_network(TWO_BUS).expect("shipped fixture is valid")
}

/// Daily load shape, one factor per hour, peaking in the evening.
pub const DAILY_FACTORS: [f64; 24] = [
    0.62, 0.58, 0.55, 0.54, 0.55, 0.60, 0.70, 0.82, 0.88, 0.90, 0.91, 0.92, 0.90, 0.88, 0.87,
    0.88, 0.92, 0.98, 1.05, 1.10, 1.08, 0.98, 0.85, 0.72,
];

/// Deterministic radial feeder with `buses` buses and `ders` generators.
///
/// A main trunk carries roughly a third of the buses; the rest hang off it as
/// laterals of random length. Loads total about 1 p.u. at factor 1.
pub fn synthetic_feeder(buses: usize, ders: usize, periods: usize, seed: u64) -> Network {
    assert!(buses >= 2 && ders < buses && periods >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trunk = (buses / 3).max(1);
    let mut lines = Vec::with_capacity(buses - 1);
    for id in 2..=trunk + 1 {
        lines.push(Line { from: id - 1, to: id, r: 0.0008, x: 0.0012, imax_sq: Some(2.5) });
    }
    let mut next = trunk + 2;
    while next <= buses {
        let root = rng.random_range(2..=trunk + 1);
        let len = rng.random_range(2..=8).min(buses - next + 1);
        let mut parent = root;
        for _ in 0..len {
            lines.push(Line {
                from: parent,
                to: next,
                r: rng.random_range(0.002..0.006),
                x: rng.random_range(0.002..0.005),
                imax_sq: Some(0.5),
            });
            parent = next;
            next += 1;
        }
    }
    let bus_list = (1..=buses)
        .map(|id| Bus { id, vmin_sq: DEFAULT_VMIN_SQ, vmax_sq: DEFAULT_VMAX_SQ, is_pcc: id == 1 })
        .collect();

    let weights: Vec<f64> = (2..=buses).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let mut base_p = BTreeMap::from([(1, 0.0)]);
    let mut base_q = BTreeMap::from([(1, 0.0)]);
    for (k, w) in weights.iter().enumerate() {
        let p = w / total;
        base_p.insert(k + 2, p);
        base_q.insert(k + 2, p * rng.random_range(0.25..0.4));
    }

    let mut sites: Vec<usize> = (2..=buses).collect();
    let mut generators = Vec::with_capacity(ders);
    for _ in 0..ders {
        let bus = sites.swap_remove(rng.random_range(0..sites.len()));
        let pmax = rng.random_range(0.08..0.16);
        let ramp = 0.3 * pmax;
        generators.push(Generator {
            bus,
            pmin: 0.0,
            pmax,
            qmin: -0.5 * pmax,
            qmax: 0.5 * pmax,
            ramp_up: Some(ramp),
            ramp_dn: Some(ramp),
        });
    }
    generators.sort_by_key(|g| g.bus);

    let factors = (0..periods).map(|t| DAILY_FACTORS[t % DAILY_FACTORS.len()]).collect();
    let net = Network {
        base_mva: 10.0,
        units: Units::Pu,
        base_kv: None,
        buses: bus_list,
        lines,
        generators,
        batteries: Vec::new(),
        demand: DemandProfile { base_p, base_q, factors, dt: 1.0 },
    };
    net.validate().expect("generated feeder is radial");
    net
}

/// The 141-bus, 10-DER, 24-period stand-in feeder.
pub fn feeder141() -> Network {
    synthetic_feeder(141, 10, 24, 141)
}
