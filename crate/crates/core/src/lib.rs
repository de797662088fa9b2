//! Bulk-surface reaction-diffusion on evolving annular domains.

pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod operators;
pub mod solver;
pub mod equilibrium;
pub mod diagnostics;
pub mod transport;
pub mod mms;
pub mod config;
pub mod simulation;
