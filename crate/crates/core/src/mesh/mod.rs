//! Table plane estimation, TSDF fusion, surface extraction and convex hulls.

mod clip;
mod hull;
mod mcubes;
mod plane;
mod trimesh;
mod tsdf;

pub use clip::clip_below_plane;
pub use hull::{convex_hull, ConvexHull, HullPolygon};
pub use mcubes::marching_cubes;
pub use plane::{ransac_plane, Plane, PlaneFit};
pub use trimesh::TriangleMesh;
pub use tsdf::{tsdf_fuse, TsdfGrid, DEFAULT_TRUNCATION, DEFAULT_VOXEL_SIZE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("no valid depth to fuse")]
    EmptyDepth,
    #[error("no surface crossing in grid")]
    EmptySurface,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
