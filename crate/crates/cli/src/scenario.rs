//! Scenario settings: string layers from a `key=value` file, flags and
//! comparison variants, resolved into a validated [`ScenarioConfig`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use flexmap::model::{AssemblyOptions, CouplingMode};
use flexmap::{fixtures, load_network, Case, Network, ObjectiveKind, RegionConfig};

/// Keys accepted in config files and variants.
pub const KEYS: [&str; 13] = [
    "net", "h", "t", "objective", "coupling", "ramp", "batteries", "case", "seed", "out", "offset", "credit", "name",
];

/// Raw settings, later layers overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            bail!("unknown setting `{key}` (expected one of {})", KEYS.join(", "));
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    /// `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse_file(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got `{line}`", n + 1))?;
            s.set(k, v.trim().trim_matches('"')).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(s)
    }

    pub fn read_file(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Settings::parse_file(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Whitespace-separated `key=value` pairs, as given to `--variant`.
    pub fn parse_inline(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for pair in text.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("variant entry `{pair}` is not key=value"))?;
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// File path, or `builtin:<name>` for a shipped network.
    pub net: String,
    pub h_count: usize,
    /// Periods kept from the network's profile; all when unset.
    pub t_count: Option<usize>,
    pub objective: ObjectiveKind,
    pub coupling: CouplingMode,
    /// Ramp limits as a percentage of each generator's capacity.
    pub ramp_pct: Option<f64>,
    pub batteries: Option<bool>,
    pub case: Option<Case>,
    pub seed: u64,
    pub out: PathBuf,
    /// Angle of the first direction, degrees.
    pub offset_deg: f64,
    /// Loss-credit rounds after the priced solve.
    pub credit_rounds: usize,
    pub name: Option<String>,
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected on/off, got `{v}`"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: `{v}`: {e}"))
}

impl ScenarioConfig {
    pub fn resolve(s: &Settings) -> Result<ScenarioConfig> {
        let net = s.get("net").ok_or_else(|| anyhow!("no network given (--net or net=)"))?.to_string();
        let h_count = s.get("h").map(|v| parse_num::<usize>("H", v)).transpose()?.unwrap_or(8);
        if h_count < 3 {
            bail!("H must be at least 3, got {h_count}");
        }
        let t_count = s.get("t").map(|v| parse_num::<usize>("T", v)).transpose()?;
        if t_count == Some(0) {
            bail!("T must be at least 1");
        }
        let objective = match s.get("objective").unwrap_or("linear").to_ascii_lowercase().as_str() {
            "linear" => ObjectiveKind::Linear,
            "surveyor" => ObjectiveKind::Surveyor,
            other => bail!("objective: expected linear or surveyor, got `{other}`"),
        };
        let coupling = match s.get("coupling").unwrap_or("all-pairs").to_ascii_lowercase().as_str() {
            "all-pairs" => CouplingMode::AllPairs,
            "same-index" => CouplingMode::SameIndex,
            other => bail!("coupling: expected all-pairs or same-index, got `{other}`"),
        };
        let ramp_pct = match s.get("ramp") {
            None => None,
            Some(v) if v.eq_ignore_ascii_case("none") => None,
            Some(v) => {
                let pct = parse_num::<f64>("ramp", v.trim_end_matches('%'))?;
                if !pct.is_finite() || pct < 0.0 {
                    bail!("ramp must be a non-negative percentage, got {v}");
                }
                Some(pct)
            }
        };
        let batteries = s.get("batteries").map(|v| parse_bool("batteries", v)).transpose()?;
        let case = s
            .get("case")
            .map(|v| Case::parse(v).ok_or_else(|| anyhow!("case: expected I, II, III or IV, got `{v}`")))
            .transpose()?;
        if case.is_some() && batteries.is_some() {
            bail!("batteries cannot be combined with case; the case decides storage");
        }
        let seed = s.get("seed").map(|v| parse_num::<u64>("seed", v)).transpose()?.unwrap_or(0);
        let offset_deg = s.get("offset").map(|v| parse_num::<f64>("offset", v)).transpose()?.unwrap_or(0.0);
        if !offset_deg.is_finite() {
            bail!("offset must be finite");
        }
        let credit_rounds = s
            .get("credit")
            .map(|v| parse_num::<usize>("credit", v))
            .transpose()?
            .unwrap_or(RegionConfig::default().credit_rounds);
        Ok(ScenarioConfig {
            net,
            h_count,
            t_count,
            objective,
            coupling,
            ramp_pct,
            batteries,
            case,
            seed,
            out: PathBuf::from(s.get("out").unwrap_or("out")),
            offset_deg,
            credit_rounds,
            name: s.get("name").map(str::to_string),
        })
    }

    pub fn load_base(&self) -> Result<Network> {
        load_source(&self.net)
    }

    /// Network after horizon, ramp, storage and case adjustments, with the
    /// matching assembly options.
    pub fn network(&self) -> Result<(Network, AssemblyOptions)> {
        let mut net = self.load_base()?;
        if let Some(t) = self.t_count {
            net = net.truncated(t)?;
        }
        let ramp = self.ramp_pct.map(|p| p / 100.0);
        if let Some(case) = self.case {
            return Ok(case.apply(&net, ramp, self.coupling));
        }
        if ramp.is_some() {
            net = net.with_ramp_fraction(ramp);
        }
        if self.batteries == Some(false) {
            net = net.without_batteries();
        }
        Ok((net, AssemblyOptions { coupling: self.coupling, ..AssemblyOptions::default() }))
    }

    pub fn region(&self, options: AssemblyOptions) -> RegionConfig {
        RegionConfig {
            h_count: self.h_count,
            offset: self.offset_deg.to_radians(),
            options,
            credit_rounds: self.credit_rounds,
            ..RegionConfig::default()
        }
    }

    /// Label used in comparison tables: the variant's name, else its case
    /// (or index) with the ramp override.
    pub fn label(&self, index: usize) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let base = self.case.map_or_else(|| format!("v{}", index + 1), |c| c.name().to_string());
        match self.ramp_pct {
            Some(p) => format!("{base}-{p}%"),
            None => base,
        }
    }
}

pub const BUILTINS: [&str; 5] = ["five_bus", "five_bus_profile", "copper_plate", "two_bus", "feeder141"];

pub fn load_source(source: &str) -> Result<Network> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return Ok(match name {
            "five_bus" => fixtures::five_bus(),
            "five_bus_profile" => fixtures::five_bus_profile(),
            "copper_plate" => fixtures::copper_plate(),
            "two_bus" => fixtures::two_bus(),
            "feeder141" => fixtures::feeder141(),
            other => bail!("unknown builtin network `{other}` (expected one of {})", BUILTINS.join(", ")),
        });
    }
    let text = fs::read_to_string(source).with_context(|| format!("reading network {source}"))?;
    load_network(&text).with_context(|| format!("loading network {source}"))
}
