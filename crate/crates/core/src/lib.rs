//! Multi-period PQ flexibility regions at the interface between a radial
//! distribution network and the transmission grid.
//!
//! A [`network::Network`] is replicated over `H` boundary directions and `T`
//! periods by [`model::assemble`], solved in one conic program by
//! [`region::solve_linear_map`] (or refined for area with
//! [`region::solve_surveyor_map`]), and checked independently by
//! [`verify::audit_map`].

pub mod baselines;
pub mod cases;
pub mod dispatch;
pub mod fixtures;
pub mod geometry;
pub mod model;
pub mod network;
pub mod par;
pub mod region;
pub mod solver;
pub mod verify;

pub use cases::Case;
pub use geometry::{Point, Polygon};
pub use network::{load_network, Network};
pub use par::Parallelism;
pub use region::{FlexibilityMap, ObjectiveKind, RegionConfig};
