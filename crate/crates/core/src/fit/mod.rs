//! Depth-supervised fitting of splat sets to masked RGB-D frames.

mod loss;
mod optimize;

pub use loss::{depth_normals, loss, loss_gradients, mask_frame, FitTarget, LossBreakdown, SplatGrad};
pub use optimize::{optimize, prune, FitResult};

use serde::{Deserialize, Serialize};

use crate::splat::RenderOptions;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("no frames given")]
    NoFrames,
    #[error("image is {image:?} but mask is {mask:?}")]
    DimensionMismatch { image: (usize, usize), mask: (usize, usize) },
    #[error("invalid fit config: {0}")]
    InvalidConfig(&'static str),
}

/// Adam step sizes per parameter class. Scale steps act on `ln s` and
/// opacity steps on `logit α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSizes {
    pub center: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub color: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self { center: 2e-4, rotation: 5e-3, scale: 5e-3, opacity: 2e-2, color: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub iterations: usize,
    pub lambda_normal: f64,
    pub lambda_depth: f64,
    pub steps: StepSizes,
    pub prune_opacity_floor: f64,
    pub prune_color_floor: f64,
    pub batch: usize,
    pub seed: u64,
    #[serde(skip)]
    pub render: RenderOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 7000,
            lambda_normal: 0.05,
            lambda_depth: 1.0,
            steps: StepSizes::default(),
            prune_opacity_floor: 0.02,
            prune_color_floor: 0.02,
            batch: 1,
            seed: 0,
            render: RenderOptions { supersample_factor: 1, ..RenderOptions::default() },
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.iterations == 0 {
            return Err(FitError::InvalidConfig("iterations must be at least 1"));
        }
        if !(self.lambda_normal >= 0.0 && self.lambda_depth >= 0.0) {
            return Err(FitError::InvalidConfig("loss weights must be non-negative"));
        }
        let s = &self.steps;
        if ![s.center, s.rotation, s.scale, s.opacity, s.color].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(FitError::InvalidConfig("step sizes must be positive"));
        }
        if self.batch == 0 {
            return Err(FitError::InvalidConfig("batch must be at least 1"));
        }
        Ok(())
    }
}
