//! Radial distribution network description: file format, validation,
//! per-unit scaling and tree structure.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 0.95² p.u.
pub const DEFAULT_VMIN_SQ: f64 = 0.9025;
/// 1.05² p.u.
pub const DEFAULT_VMAX_SQ: f64 = 1.1025;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed network document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("network is not radial: cycle through bus {0}")]
    Cycle(usize),
    #[error("network is not radial: bus {0} is not connected to the PCC")]
    Disconnected(usize),
    #[error("nonpositive base quantity: {0}")]
    Base(String),
}

fn invalid(msg: impl Into<String>) -> NetworkError {
    NetworkError::Validation(msg.into())
}

fn default_vmin() -> f64 {
    DEFAULT_VMIN_SQ
}

fn default_vmax() -> f64 {
    DEFAULT_VMAX_SQ
}

fn default_eta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Every quantity already in per-unit on `base_mva`.
    #[default]
    Pu,
    /// MW, MVAr, MWh, ohm and kA² on `base_mva` / `base_kv`.
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default = "default_vmin")]
    pub vmin_sq: f64,
    #[serde(default = "default_vmax")]
    pub vmax_sq: f64,
    #[serde(rename = "pcc", default)]
    pub is_pcc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Squared current limit; `None` leaves the line unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imax_sq: Option<f64>,
}

impl Line {
    pub fn z_sq(&self) -> f64 {
        self.r * self.r + self.x * self.x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    #[serde(default)]
    pub pmin: f64,
    pub pmax: f64,
    #[serde(default)]
    pub qmin: f64,
    #[serde(default)]
    pub qmax: f64,
    /// Per-interval ramp limits; `None` means no inter-temporal limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_dn: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Battery {
    pub bus: usize,
    pub emax: f64,
    pub pc_max: f64,
    pub pd_max: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    pub e0: f64,
}

// `e0` defaults to half the capacity, which serde's field defaults cannot express.
impl<'de> Deserialize<'de> for Battery {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            bus: usize,
            emax: f64,
            pc_max: f64,
            pd_max: f64,
            #[serde(default = "default_eta")]
            eta_c: f64,
            #[serde(default = "default_eta")]
            eta_d: f64,
            e0: Option<f64>,
        }
        let raw = Raw::deserialize(d)?;
        Ok(Battery {
            bus: raw.bus,
            emax: raw.emax,
            pc_max: raw.pc_max,
            pd_max: raw.pd_max,
            eta_c: raw.eta_c,
            eta_d: raw.eta_d,
            e0: raw.e0.unwrap_or(raw.emax / 2.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    #[serde(default)]
    pub base_p: BTreeMap<usize, f64>,
    #[serde(default)]
    pub base_q: BTreeMap<usize, f64>,
    pub factors: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    #[serde(default)]
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_kv: Option<f64>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub batteries: Vec<Battery>,
    pub demand: DemandProfile,
}

/// Parse, normalize and validate a network document.
pub fn load_network(text: &str) -> Result<Network, NetworkError> {
    let mut net: Network = serde_json::from_str(text)?;
    if net.units == Units::Physical {
        let base_kv = net
            .base_kv
            .ok_or_else(|| invalid("physical units require `base_kv`"))?;
        let base_mva = net.base_mva;
        net = to_per_unit(&net, base_mva, base_kv)?;
    }
    net.fill_demand()?;
    net.validate()?;
    Ok(net)
}

impl Network {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// Number of demand periods.
    pub fn horizon(&self) -> usize {
        self.demand.factors.len()
    }

    pub fn pcc_bus(&self) -> &Bus {
        self.buses
            .iter()
            .find(|b| b.is_pcc)
            .expect("validated network has a PCC bus")
    }

    /// Demand (p, q) at bus `id` in period `t` (0-based).
    pub fn demand_at(&self, id: usize, t: usize) -> (f64, f64) {
        let f = self.demand.factors[t];
        let p = self.demand.base_p.get(&id).copied().unwrap_or(0.0);
        let q = self.demand.base_q.get(&id).copied().unwrap_or(0.0);
        (p * f, q * f)
    }

    /// Total system demand in period `t`.
    pub fn total_demand(&self, t: usize) -> (f64, f64) {
        self.buses
            .iter()
            .map(|b| self.demand_at(b.id, t))
            .fold((0.0, 0.0), |a, d| (a.0 + d.0, a.1 + d.1))
    }

    pub fn without_batteries(&self) -> Network {
        Network {
            batteries: Vec::new(),
            ..self.clone()
        }
    }

    /// Set every generator's ramp limits to `fraction` of its capacity, or
    /// remove them with `None`.
    pub fn with_ramp_fraction(&self, fraction: Option<f64>) -> Network {
        let mut net = self.clone();
        for g in &mut net.generators {
            let r = fraction.map(|f| f * g.pmax.abs());
            g.ramp_up = r;
            g.ramp_dn = r;
        }
        net
    }

    /// Keep only the first `periods` demand factors.
    pub fn truncated(&self, periods: usize) -> Result<Network, NetworkError> {
        if periods == 0 || periods > self.horizon() {
            return Err(invalid(format!(
                "horizon {periods} outside 1..={}",
                self.horizon()
            )));
        }
        let mut net = self.clone();
        net.demand.factors.truncate(periods);
        Ok(net)
    }

    /// Single-period network for period `t` (0-based).
    pub fn period(&self, t: usize) -> Network {
        let mut net = self.clone();
        net.demand.factors = vec![self.demand.factors[t]];
        net
    }

    fn fill_demand(&mut self) -> Result<(), NetworkError> {
        let ids: BTreeSet<usize> = self.buses.iter().map(|b| b.id).collect();
        for key in self.demand.base_p.keys().chain(self.demand.base_q.keys()) {
            if !ids.contains(key) {
                return Err(invalid(format!("demand references unknown bus {key}")));
            }
        }
        for id in ids {
            self.demand.base_p.entry(id).or_insert(0.0);
            self.demand.base_q.entry(id).or_insert(0.0);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} is not finite")))
            }
        };
        if !(self.base_mva > 0.0) {
            return Err(NetworkError::Base(format!("base_mva = {}", self.base_mva)));
        }
        if self.buses.is_empty() {
            return Err(invalid("no buses"));
        }
        let mut ids = BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(invalid(format!("duplicate bus id {}", b.id)));
            }
            finite(b.vmin_sq, "vmin_sq")?;
            finite(b.vmax_sq, "vmax_sq")?;
            if !(0.0 < b.vmin_sq && b.vmin_sq < b.vmax_sq) {
                return Err(invalid(format!("bus {}: need 0 < vmin_sq < vmax_sq", b.id)));
            }
        }
        match self.buses.iter().filter(|b| b.is_pcc).count() {
            1 => {}
            0 => return Err(invalid("no PCC bus")),
            n => return Err(invalid(format!("{n} PCC buses, expected exactly one"))),
        }
        let mut pairs = BTreeSet::new();
        for l in &self.lines {
            for end in [l.from, l.to] {
                if !ids.contains(&end) {
                    return Err(invalid(format!("line references unknown bus {end}")));
                }
            }
            finite(l.r, "r")?;
            finite(l.x, "x")?;
            if l.r < 0.0 || l.x < 0.0 || l.r + l.x <= 0.0 {
                return Err(invalid(format!(
                    "line ({},{}): need r, x >= 0 and r + x > 0",
                    l.from, l.to
                )));
            }
            if let Some(imax) = l.imax_sq {
                if !(imax > 0.0) {
                    return Err(invalid(format!("line ({},{}): imax_sq must be > 0", l.from, l.to)));
                }
            }
            if !pairs.insert((l.from, l.to)) {
                return Err(invalid(format!("duplicate line ({},{})", l.from, l.to)));
            }
        }
        for g in &self.generators {
            if !ids.contains(&g.bus) {
                return Err(invalid(format!("generator at unknown bus {}", g.bus)));
            }
            for v in [g.pmin, g.pmax, g.qmin, g.qmax] {
                finite(v, "generator limit")?;
            }
            if g.pmin > g.pmax || g.qmin > g.qmax {
                return Err(invalid(format!("generator at bus {}: inverted limits", g.bus)));
            }
            if g.ramp_up.is_some_and(|r| !(r >= 0.0)) || g.ramp_dn.is_some_and(|r| !(r >= 0.0)) {
                return Err(invalid(format!("generator at bus {}: negative ramp", g.bus)));
            }
        }
        for b in &self.batteries {
            if !ids.contains(&b.bus) {
                return Err(invalid(format!("battery at unknown bus {}", b.bus)));
            }
            for v in [b.emax, b.pc_max, b.pd_max, b.eta_c, b.eta_d, b.e0] {
                finite(v, "battery parameter")?;
            }
            if !(0.0 <= b.e0 && b.e0 <= b.emax) {
                return Err(invalid(format!("battery at bus {}: need 0 <= e0 <= emax", b.bus)));
            }
            if !(0.0 < b.eta_c && b.eta_c <= 1.0 && 0.0 < b.eta_d && b.eta_d <= 1.0) {
                return Err(invalid(format!("battery at bus {}: efficiencies outside (0,1]", b.bus)));
            }
            if b.pc_max < 0.0 || b.pd_max < 0.0 {
                return Err(invalid(format!("battery at bus {}: negative power limit", b.bus)));
            }
        }
        if self.demand.factors.is_empty() {
            return Err(invalid("demand profile has no periods"));
        }
        for &f in &self.demand.factors {
            finite(f, "demand factor")?;
        }
        if !(self.demand.dt > 0.0) {
            return Err(invalid("dt must be > 0"));
        }
        for (&id, &v) in self.demand.base_p.iter().chain(self.demand.base_q.iter()) {
            if !ids.contains(&id) {
                return Err(invalid(format!("demand references unknown bus {id}")));
            }
            finite(v, "demand")?;
        }
        validate_radial(self)?;
        Ok(())
    }
}

/// Scale a network given in physical units into per-unit.
pub fn to_per_unit(raw: &Network, base_mva: f64, base_kv: f64) -> Result<Network, NetworkError> {
    scale(raw, base_mva, base_kv, false)
}

/// Inverse of [`to_per_unit`].
pub fn to_physical(pu: &Network, base_mva: f64, base_kv: f64) -> Result<Network, NetworkError> {
    scale(pu, base_mva, base_kv, true)
}

fn scale(net: &Network, base_mva: f64, base_kv: f64, inverse: bool) -> Result<Network, NetworkError> {
    if !(base_mva > 0.0) {
        return Err(NetworkError::Base(format!("base_mva = {base_mva}")));
    }
    if !(base_kv > 0.0) {
        return Err(NetworkError::Base(format!("base_kv = {base_kv}")));
    }
    let z_base = base_kv * base_kv / base_mva;
    // kA for MVA / kV
    let i_base = base_mva / (3f64.sqrt() * base_kv);
    let (s, z, e, i2) = (base_mva, z_base, base_mva, i_base * i_base);
    let f = |v: f64, b: f64| if inverse { v * b } else { v / b };

    let mut out = net.clone();
    out.base_mva = base_mva;
    out.base_kv = Some(base_kv);
    out.units = if inverse { Units::Physical } else { Units::Pu };
    for l in &mut out.lines {
        l.r = f(l.r, z);
        l.x = f(l.x, z);
        l.imax_sq = l.imax_sq.map(|v| f(v, i2));
    }
    for g in &mut out.generators {
        g.pmin = f(g.pmin, s);
        g.pmax = f(g.pmax, s);
        g.qmin = f(g.qmin, s);
        g.qmax = f(g.qmax, s);
        g.ramp_up = g.ramp_up.map(|v| f(v, s));
        g.ramp_dn = g.ramp_dn.map(|v| f(v, s));
    }
    for b in &mut out.batteries {
        b.emax = f(b.emax, e);
        b.e0 = f(b.e0, e);
        b.pc_max = f(b.pc_max, s);
        b.pd_max = f(b.pd_max, s);
    }
    for v in out.demand.base_p.values_mut().chain(out.demand.base_q.values_mut()) {
        *v = f(*v, s);
    }
    Ok(out)
}

/// Tree structure of a radial network rooted at the PCC. Buses are addressed
/// by position in `Network::buses`, lines by position in `Network::lines`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub root: usize,
    pub index_of: BTreeMap<usize, usize>,
    /// Parent bus of each bus (`None` for the root).
    pub parent: Vec<Option<usize>>,
    /// Line feeding each bus from its parent.
    pub parent_line: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Lines leaving each bus towards its children.
    pub child_lines: Vec<Vec<usize>>,
    /// Breadth-first order from the root; leaves come last.
    pub order: Vec<usize>,
    /// (upstream bus, downstream bus) for each line.
    pub line_ends: Vec<(usize, usize)>,
}

impl Topology {
    /// Parent of bus `id`, by id.
    pub fn parent_of(&self, net: &Network, id: usize) -> Option<usize> {
        let i = *self.index_of.get(&id)?;
        self.parent[i].map(|p| net.buses[p].id)
    }
}

/// Check that the line graph is a tree containing every bus and orient it
/// away from the PCC.
pub fn validate_radial(net: &Network) -> Result<Topology, NetworkError> {
    let n = net.buses.len();
    let index_of: BTreeMap<usize, usize> =
        net.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let root = net
        .buses
        .iter()
        .position(|b| b.is_pcc)
        .ok_or_else(|| invalid("no PCC bus"))?;

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, l) in net.lines.iter().enumerate() {
        let a = *index_of
            .get(&l.from)
            .ok_or_else(|| invalid(format!("line references unknown bus {}", l.from)))?;
        let b = *index_of
            .get(&l.to)
            .ok_or_else(|| invalid(format!("line references unknown bus {}", l.to)))?;
        if a == b {
            return Err(NetworkError::Cycle(l.from));
        }
        adj[a].push((b, k));
        adj[b].push((a, k));
    }

    let mut parent = vec![None; n];
    let mut parent_line = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut child_lines = vec![Vec::new(); n];
    let mut line_ends = vec![(usize::MAX, usize::MAX); net.lines.len()];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(w, k) in &adj[u] {
            if parent_line[u] == Some(k) {
                continue;
            }
            if seen[w] {
                return Err(NetworkError::Cycle(net.buses[w].id));
            }
            seen[w] = true;
            parent[w] = Some(u);
            parent_line[w] = Some(k);
            children[u].push(w);
            child_lines[u].push(k);
            line_ends[k] = (u, w);
            queue.push_back(w);
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(NetworkError::Disconnected(net.buses[i].id));
    }
    Ok(Topology {
        root,
        index_of,
        parent,
        parent_line,
        children,
        child_lines,
        order,
        line_ends,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(lines: &str, buses: &str) -> String {
        format!(
            r#"{{"base_mva": 1.0, "buses": [{buses}], "lines": [{lines}],
                "demand": {{"base_p": {{}}, "base_q": {{}}, "factors": [1.0], "dt": 1.0}}}}"#
        )
    }

    #[test]
    fn two_bus_document() {
        let text = doc(
            r#"{"from": 1, "to": 2, "r": 0.01, "x": 0.01}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}"#,
        );
        let net = load_network(&text).unwrap();
        assert_eq!(net.lines.len(), 1);
        assert_eq!(net.buses[1].vmin_sq, DEFAULT_VMIN_SQ);
        assert_eq!(net.demand.base_p.len(), 2);
    }

    #[test]
    fn triangle_is_a_cycle() {
        let text = doc(
            r#"{"from": 1, "to": 2, "r": 0.01, "x": 0.01},
               {"from": 2, "to": 3, "r": 0.01, "x": 0.01},
               {"from": 3, "to": 1, "r": 0.01, "x": 0.01}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}, {"id": 3}"#,
        );
        assert!(matches!(load_network(&text), Err(NetworkError::Cycle(_))));
    }

    #[test]
    fn forest_is_disconnected() {
        let text = doc(
            r#"{"from": 1, "to": 2, "r": 0.01, "x": 0.01},
               {"from": 3, "to": 4, "r": 0.01, "x": 0.01}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}, {"id": 3}, {"id": 4}"#,
        );
        assert!(matches!(load_network(&text), Err(NetworkError::Disconnected(_))));
    }

    #[test]
    fn pcc_count_is_checked() {
        let none = doc("", r#"{"id": 1}"#);
        assert!(matches!(load_network(&none), Err(NetworkError::Validation(_))));
        let two = doc(
            r#"{"from": 1, "to": 2, "r": 0.01, "x": 0.01}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2, "pcc": true}"#,
        );
        assert!(matches!(load_network(&two), Err(NetworkError::Validation(_))));
    }

    #[test]
    fn dangling_line_is_rejected() {
        let text = doc(
            r#"{"from": 1, "to": 9, "r": 0.01, "x": 0.01}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}"#,
        );
        assert!(matches!(load_network(&text), Err(NetworkError::Validation(_))));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(load_network("{ not json"), Err(NetworkError::Parse(_))));
    }

    #[test]
    fn path_and_star_parents() {
        let path = load_network(&doc(
            r#"{"from": 1, "to": 2, "r": 0.01, "x": 0.0},
               {"from": 3, "to": 2, "r": 0.01, "x": 0.0}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}, {"id": 3}"#,
        ))
        .unwrap();
        let topo = validate_radial(&path).unwrap();
        assert_eq!(topo.parent_of(&path, 2), Some(1));
        assert_eq!(topo.parent_of(&path, 3), Some(2));
        assert_eq!(topo.parent_of(&path, 1), None);
        // line given as (3,2) is oriented 2 -> 3
        assert_eq!(topo.line_ends[1], (1, 2));

        let star = load_network(&doc(
            r#"{"from": 1, "to": 2, "r": 0.01, "x": 0.01},
               {"from": 1, "to": 3, "r": 0.01, "x": 0.01},
               {"from": 4, "to": 1, "r": 0.01, "x": 0.01}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}, {"id": 3}, {"id": 4}"#,
        ))
        .unwrap();
        let topo = validate_radial(&star).unwrap();
        for id in [2, 3, 4] {
            assert_eq!(topo.parent_of(&star, id), Some(1));
        }
        assert_ne!(*topo.order.last().unwrap(), topo.root);
    }

    #[test]
    fn battery_e0_defaults_to_half_capacity() {
        let b: Battery = serde_json::from_str(
            r#"{"bus": 1, "emax": 0.1, "pc_max": 0.1, "pd_max": 0.1, "eta_c": 0.9, "eta_d": 0.9}"#,
        )
        .unwrap();
        assert_eq!(b.e0, 0.05);
    }

    #[test]
    fn per_unit_scaling() {
        let text = doc(
            r#"{"from": 1, "to": 2, "r": 1.0, "x": 2.0}"#,
            r#"{"id": 1, "pcc": true}, {"id": 2}"#,
        );
        let mut net = load_network(&text).unwrap();
        net.demand.base_p.insert(2, 1.3);
        net.demand.base_q.insert(2, 0.427);

        let same = to_per_unit(&net, 1.0, 1.0).unwrap();
        assert_eq!(same.demand.base_p[&2], 1.3);

        let pu = to_per_unit(&net, 10.0, 10.0).unwrap();
        assert!((pu.demand.base_q[&2] - 0.0427).abs() < 1e-15);
        // z_base = 10 ohm
        assert!((pu.lines[0].x - 0.2).abs() < 1e-15);

        assert!(matches!(to_per_unit(&net, 0.0, 1.0), Err(NetworkError::Base(_))));
        assert!(matches!(to_per_unit(&net, 1.0, -1.0), Err(NetworkError::Base(_))));
    }

    #[test]
    fn physical_document_is_converted_on_load() {
        let text = r#"{"base_mva": 10.0, "units": "physical", "base_kv": 10.0,
            "buses": [{"id": 1, "pcc": true}, {"id": 2}],
            "lines": [{"from": 1, "to": 2, "r": 0.5, "x": 1.0}],
            "batteries": [{"bus": 2, "emax": 0.2, "pc_max": 0.1, "pd_max": 0.1}],
            "demand": {"base_p": {"2": 1.3}, "base_q": {"2": 0.427}, "factors": [1.0], "dt": 1.0}}"#;
        let net = load_network(text).unwrap();
        assert_eq!(net.units, Units::Pu);
        assert!((net.demand.base_p[&2] - 0.13).abs() < 1e-15);
        assert!((net.batteries[0].emax - 0.02).abs() < 1e-15);
        assert!((net.batteries[0].e0 - 0.01).abs() < 1e-15);
    }
}
