//! Multi-period flexibility maps: direction sets, the monolithic map solve
//! and the per-period polygons with their witness dispatches.

mod export;
mod solve;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::Dispatch;
use crate::geometry::{signed_area, Point, Polygon};
use crate::model::{AssemblyOptions, ModelError};
use crate::solver::{Diagnostic, LossPrice, SolveError, SolveStats, Status};

pub use export::{map_csv, overlay_svg, period_svg, read_map_csv, MapCsv};
pub use solve::{
    extract_dispatch, nominal_operation, solve_linear_map, solve_map, solve_surveyor_map,
    RegionConfig,
};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("at least 3 directions are needed, got {0}")]
    TooFewDirections(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{stage} is infeasible{}", fmt_diag(.diagnostic))]
    Infeasible { stage: &'static str, diagnostic: Option<Diagnostic> },
    #[error("{stage} stopped with status {status:?}{}", fmt_diag(.diagnostic))]
    Solver { stage: &'static str, status: Status, diagnostic: Option<Diagnostic> },
    #[error(transparent)]
    Surveyor(#[from] SolveError),
    #[error("vertex (h={h}, t={t}) is out of range")]
    OutOfRange { h: usize, t: usize },
}

fn fmt_diag(d: &Option<Diagnostic>) -> String {
    match d {
        Some(d) => format!(" (worst family {}: {:.3e})", d.family.name(), d.amount),
        None => String::new(),
    }
}

/// Exploration angles, strictly increasing in [0, 2π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub angles: Vec<f64>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn unit(&self, h: usize) -> (f64, f64) {
        let a = self.angles[h];
        (a.cos(), a.sin())
    }
}

/// `H` equally spaced angles starting at `offset`, wrapped and sorted.
pub fn make_directions(h_count: usize, offset: f64) -> Result<DirectionSet, RegionError> {
    if h_count < 3 {
        return Err(RegionError::TooFewDirections(h_count));
    }
    let mut angles: Vec<f64> = (0..h_count)
        .map(|h| (offset + TAU * h as f64 / h_count as f64).rem_euclid(TAU))
        .map(|a| if a >= TAU { 0.0 } else { a })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(DirectionSet { angles })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    #[default]
    Linear,
    Surveyor,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Linear => "linear",
            ObjectiveKind::Surveyor => "surveyor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub h_count: usize,
    pub t_count: usize,
    pub options: AssemblyOptions,
    pub objective: ObjectiveKind,
    pub loss_price: LossPrice,
    pub stats: SolveStats,
    pub wall_time_s: f64,
    /// Value of the map objective at the returned assignment.
    pub objective_value: f64,
    /// Total area per accepted refinement iterate; empty for linear maps.
    pub area_trace: Vec<f64>,
    /// Largest l·v − p² − q² over all line replicas.
    pub max_gap: f64,
    pub ramp_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityMap {
    pub directions: DirectionSet,
    /// Vertices of each period's polygon in direction order, `[t][h]`.
    pub periods: Vec<Vec<Point>>,
    /// Witness dispatch of each vertex, `[t][h]`.
    pub dispatches: Vec<Vec<Dispatch>>,
    pub metadata: MapMetadata,
}

impl FlexibilityMap {
    pub fn h_count(&self) -> usize {
        self.directions.len()
    }

    pub fn t_count(&self) -> usize {
        self.periods.len()
    }

    pub fn polygon(&self, t: usize) -> Polygon {
        Polygon::new(self.periods[t].clone())
    }

    /// Shoelace area of every period.
    pub fn areas(&self) -> Vec<f64> {
        self.periods.iter().map(|p| signed_area(p).abs()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
