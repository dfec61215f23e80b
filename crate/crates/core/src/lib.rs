//! Object-centric Gaussian-splat world model.
//!
//! Objects are fitted as 2D Gaussian splats from masked RGB-D frames, meshed
//! through TSDF fusion, and coupled to a deterministic rigid-body stepper.
//! Recorded demonstrations can then be replayed, transformed equivariantly,
//! verified and rendered into new training data.

pub mod agent;
pub mod augment;
pub mod cli;
pub mod dynamics;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod splat;
pub mod synthetic;
