//! Deterministic rigid-body stepping for convex objects on a table.

mod body;
mod collision;
mod world;

pub use body::{sync_splats, MassProperties, ObjectAsset, PhysicalParams, PoseDelta, RigidBodyState};
pub use collision::{hull_contact, placed_hull_contact, plane_contacts, Contact, PlacedHull};
pub use world::{KinematicHull, SettleReport, SolverConfig, WorldState};

use crate::mesh::MeshError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("state of object {0:?} became non-finite")]
    NonFiniteState(String),
    #[error("invalid physical parameters")]
    InvalidParams,
    #[error("duplicate object id {0:?}")]
    DuplicateId(String),
    #[error("collision hull: {0}")]
    Hull(MeshError),
}
