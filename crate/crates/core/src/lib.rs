//! Repeated-election polarization dynamics.
//!
//! Voters drift toward each elected winner and candidates chase their supporter
//! centroids. The crate provides the electoral rules, the update model, checkers
//! for the contraction bounds driven by the winner radius and the supporter
//! centroid radius, two per-round winner oracles, and a reproducible factorial
//! experiment runner.

pub mod bounds;
pub mod dynamics;
pub mod electorate;
pub mod error;
pub mod geometry;
pub mod oracles;
pub mod rng;
pub mod rules;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Point, PointSet, PolicyBox};
