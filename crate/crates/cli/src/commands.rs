use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use flexmap::baselines::{monte_carlo_region, Outcome, SamplingOptions};
use flexmap::geometry::signed_area;
use flexmap::model::assemble;
use flexmap::region::{map_csv, overlay_svg, period_svg, read_map_csv, solve_map, RegionError};
use flexmap::verify::{audit_map, audit_vertices, AuditConfig, VerificationReport};
use flexmap::{fixtures, FlexibilityMap, Network, Parallelism};
use serde_json::json;

use crate::scenario::{ScenarioConfig, Settings};

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const USAGE: u8 = 1;
pub const INFEASIBLE: u8 = 2;
pub const VERIFICATION: u8 = 3;

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: USAGE, error: e.into() }
    }
}

fn region_failure(e: RegionError) -> Failure {
    let code = match e {
        RegionError::Infeasible { .. } | RegionError::Solver { .. } | RegionError::Surveyor(_) => INFEASIBLE,
        RegionError::TooFewDirections(_) | RegionError::Model(_) | RegionError::OutOfRange { .. } => USAGE,
    };
    Failure { code, error: e.into() }
}

/// Apply FLEXMAP_THREADS: `1` runs sequentially, larger values size the
/// worker pool.
pub fn configure_threads() -> Result<Parallelism, Failure> {
    let Ok(raw) = std::env::var("FLEXMAP_THREADS") else {
        return Ok(Parallelism::Parallel);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("FLEXMAP_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 1 {
        return Ok(Parallelism::Sequential);
    }
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("thread pool already configured: {e}");
    }
    Ok(Parallelism::Parallel)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// The map with wall-clock fields cleared, so its JSON depends only on the
/// scenario.
fn without_timing(map: &FlexibilityMap) -> FlexibilityMap {
    let mut m = map.clone();
    m.metadata.wall_time_s = 0.0;
    m.metadata.stats.solve_time_s = 0.0;
    m
}

fn solve_stats(settings: &Settings, map: &FlexibilityMap) -> serde_json::Value {
    let meta = &map.metadata;
    let mut scenario = settings.as_map().clone();
    scenario.remove("out");
    json!({
        "scenario": scenario,
        "objective": meta.objective.name(),
        "options": meta.options,
        "h_count": meta.h_count,
        "t_count": meta.t_count,
        "areas": map.areas(),
        "objective_value": meta.objective_value,
        "max_gap": meta.max_gap,
        "ramp_rows": meta.ramp_rows,
        "iterations": meta.stats.iterations,
        "conic_solves": meta.stats.conic_solves,
        "nodes": meta.stats.nodes,
        "area_trace": meta.area_trace,
    })
}

pub fn solve(settings: &Settings, overlay: bool, dump_model: bool) -> Result<(), Failure> {
    let cfg = ScenarioConfig::resolve(settings)?;
    let (net, options) = cfg.network()?;
    let region = cfg.region(options);
    prepare_out(&cfg.out)?;
    write(&cfg.out, "network.json", &net.to_json())?;
    if dump_model {
        let model = assemble(&net, cfg.h_count, options)?;
        write(&cfg.out, "model.txt", &model.listing())?;
    }

    let map = solve_map(&net, &region, cfg.objective).map_err(region_failure)?;
    write(&cfg.out, "map.csv", &map_csv(&map))?;
    write(&cfg.out, "map.json", &without_timing(&map).to_json())?;
    for t in 0..map.t_count() {
        write(&cfg.out, &format!("period_{}.svg", t + 1), &period_svg(&map, t))?;
    }
    if overlay {
        write(&cfg.out, "overlay.svg", &overlay_svg(&map))?;
    }
    let stats = solve_stats(settings, &map);
    write(&cfg.out, "stats.json", &serde_json::to_string_pretty(&stats)?)?;
    let timing = json!({
        "wall_time_s": map.metadata.wall_time_s,
        "solve_time_s": map.metadata.stats.solve_time_s,
    });
    write(&cfg.out, "timing.json", &serde_json::to_string_pretty(&timing)?)?;

    println!(
        "{} map, H={}, T={}, {} coupling: {:.2} s, max gap {:.2e}",
        cfg.objective.name(),
        map.h_count(),
        map.t_count(),
        if options.coupling == flexmap::model::CouplingMode::AllPairs { "all-pairs" } else { "same-index" },
        map.metadata.wall_time_s,
        map.metadata.max_gap
    );
    for (t, a) in map.areas().iter().enumerate() {
        println!("  t={:<3} area {a:.6}", t + 1);
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

struct CompareRow {
    label: String,
    period: usize,
    objective: &'static str,
    area: f64,
    wall_time_s: f64,
}

pub const COMPARE_HEADER: &str = "case,period,objective,area,relative_area_pct,wall_time_s";

pub fn compare(base: &Settings, variants: &[String]) -> Result<(), Failure> {
    if variants.len() < 2 {
        return Err(anyhow!("compare needs at least two --variant settings, got {}", variants.len()).into());
    }
    let mut configs = Vec::with_capacity(variants.len());
    for (k, text) in variants.iter().enumerate() {
        let mut s = base.clone();
        s.merge(&Settings::parse_inline(text).with_context(|| format!("variant {}", k + 1))?);
        configs.push(ScenarioConfig::resolve(&s).with_context(|| format!("variant {}", k + 1))?);
    }
    let out = PathBuf::from(base.get("out").unwrap_or("out"));

    let mut rows = Vec::new();
    let mut reference: Vec<f64> = Vec::new();
    for (k, cfg) in configs.iter().enumerate() {
        let (net, options) = cfg.network()?;
        let start = Instant::now();
        let map = solve_map(&net, &cfg.region(options), cfg.objective).map_err(region_failure)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        let areas = map.areas();
        log::info!("variant {} ({}) solved in {wall_time_s:.2} s", k + 1, cfg.label(k));
        if k == 0 {
            reference.clone_from(&areas);
        }
        for (t, area) in areas.into_iter().enumerate() {
            rows.push(CompareRow { label: cfg.label(k), period: t + 1, objective: cfg.objective.name(), area, wall_time_s });
        }
    }

    let mut csv = String::from(COMPARE_HEADER);
    csv.push('\n');
    println!("{:<10} {:>6} {:>9} {:>10} {:>9} {:>9}", "case", "period", "objective", "area", "rel %", "time s");
    for r in &rows {
        let rel = reference.get(r.period - 1).map_or(f64::NAN, |&a0| 100.0 * r.area / a0);
        let _ = writeln!(csv, "{},{},{},{:.6},{:.2},{:.3}", r.label, r.period, r.objective, r.area, rel, r.wall_time_s);
        println!("{:<10} {:>6} {:>9} {:>10.4} {:>9.2} {:>9.2}", r.label, r.period, r.objective, r.area, rel, r.wall_time_s);
    }
    prepare_out(&out)?;
    let path = write(&out, "compare.csv", &csv)?;
    println!("table in {}", path.display());
    Ok(())
}

fn audit(cfg: &ScenarioConfig, map_path: &Path, audit_cfg: &AuditConfig) -> Result<VerificationReport, Failure> {
    let text = fs::read_to_string(map_path).with_context(|| format!("reading {}", map_path.display()))?;
    let is_csv = map_path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut cfg = cfg.clone();
    if is_csv {
        let vertices = read_map_csv(&text).map_err(|e| anyhow!("{}: {e}", map_path.display()))?;
        cfg.t_count = cfg.t_count.or(Some(vertices.periods.len()));
        let (net, options) = cfg.network()?;
        Ok(audit_vertices(&vertices, &net, &options, audit_cfg)?)
    } else {
        let map = FlexibilityMap::from_json(&text).with_context(|| format!("parsing {}", map_path.display()))?;
        cfg.t_count = cfg.t_count.or(Some(map.t_count()));
        let (net, _) = cfg.network()?;
        Ok(audit_map(&map, &net, audit_cfg)?)
    }
}

pub fn verify(settings: &Settings, map_path: &Path, trials: usize, parallelism: Parallelism) -> Result<(), Failure> {
    let cfg = ScenarioConfig::resolve(settings)?;
    let audit_cfg = AuditConfig { trials, seed: cfg.seed, parallelism, ..AuditConfig::default() };
    let report = audit(&cfg, map_path, &audit_cfg)?;
    prepare_out(&cfg.out)?;
    write(&cfg.out, "report.json", &report.to_json())?;
    print!("{}", report.summary());
    if report.verdicts.passed {
        Ok(())
    } else {
        Err(Failure { code: VERIFICATION, error: anyhow!("verification failed; see {}", cfg.out.join("report.json").display()) })
    }
}

pub fn sample(settings: &Settings, period: usize, n: usize, parallelism: Parallelism) -> Result<(), Failure> {
    let cfg = ScenarioConfig::resolve(settings)?;
    if period == 0 {
        return Err(anyhow!("periods are 1-based").into());
    }
    let (net, options) = cfg.network()?;
    let opts = SamplingOptions { network: options.network, parallelism };
    let mc = monte_carlo_region(&net, period - 1, n, cfg.seed, opts)?;
    let area = signed_area(&mc.hull.vertices).abs();

    let mut hull = String::from("p,q\n");
    for (p, q) in &mc.hull.vertices {
        let _ = writeln!(hull, "{p},{q}");
    }
    let cloud = &mc.cloud;
    let summary = json!({
        "period": period,
        "seed": cloud.seed,
        "attempted": cloud.attempted,
        "feasible": cloud.feasible,
        "storage": cloud.count(Outcome::Storage),
        "limits": cloud.count(Outcome::Limits),
        "inexact": cloud.count(Outcome::Inexact),
        "solver": cloud.count(Outcome::Solver),
        "hull_vertices": mc.hull.vertices.len(),
        "hull_area": area,
    });
    prepare_out(&cfg.out)?;
    write(&cfg.out, "samples.csv", &cloud.to_csv())?;
    write(&cfg.out, "hull.csv", &hull)?;
    write(&cfg.out, "sample_summary.json", &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "period {period}: {}/{} feasible, hull of {} vertices, area {area:.6}",
        cloud.feasible,
        cloud.attempted,
        mc.hull.vertices.len()
    );
    Ok(())
}

pub fn synth(buses: usize, ders: usize, periods: usize, seed: u64, output: &Path) -> Result<(), Failure> {
    if buses < 2 || ders >= buses || periods == 0 {
        return Err(anyhow!("need at least 2 buses, fewer DERs than buses and at least 1 period").into());
    }
    let net: Network = fixtures::synthetic_feeder(buses, ders, periods, seed);
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    fs::write(output, net.to_json()).with_context(|| format!("writing {}", output.display()))?;
    println!("{buses}-bus feeder with {ders} DERs over {periods} periods written to {}", output.display());
    Ok(())
}
