//! Gaussian-disk appearance model and its CPU rasterizer.

mod filter;
mod gaussian;
mod init;
mod raster;

pub use filter::{dedup_background, filter_radius_outliers, radius_outlier_inliers};
pub use gaussian::{
    dc_to_rgb, rgb_to_dc, sh1_basis, world_splats, Gaussian2D, GaussianSet, MAX_SH_DEGREE, SH_C0, SH_C1,
};
pub use init::{init_from_rgbd, INIT_OPACITY, INIT_SCALE_RANGE};
pub(crate) use raster::{project_splats, Footprint, ProjectedSplat, TileBins};
pub use raster::{
    rasterize, rasterize_float, rasterize_reference, render_downsampled, render_downsampled_float, RenderBuffer,
    RenderOptions, SplatLayer, DEPTH_VALID_WEIGHT,
};

use crate::geometry::GeomError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplatError {
    #[error("no frames given")]
    NoFrames,
    #[error("mask covers no pixel with valid depth")]
    NoValidPixels,
    #[error(transparent)]
    Geometry(#[from] GeomError),
}
