use rayon::prelude::*;

use crate::geometry::{unproject, Frame, Vec3};

use super::MeshError;

pub const DEFAULT_VOXEL_SIZE: f64 = 0.005;
pub const DEFAULT_TRUNCATION: f64 = 0.02;

/// Signed distances sampled at grid nodes `origin + voxel_size·(i, j, k)`.
/// Positive in front of the observed surface, negative behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfGrid {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub truncation: f64,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TsdfGrid {
    pub fn new(origin: Vec3, voxel_size: f64, dims: [usize; 3], truncation: f64) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self { origin, voxel_size, dims, truncation, values: vec![truncation; n], weights: vec![0.0; n] }
    }

    /// Sample an arbitrary signed distance function, clamped to the truncation.
    pub fn from_fn(origin: Vec3, voxel_size: f64, dims: [usize; 3], truncation: f64, sdf: impl Fn(Vec3) -> f64) -> Self {
        let mut g = Self::new(origin, voxel_size, dims, truncation);
        for idx in 0..g.values.len() {
            let p = g.position(g.unflatten(idx));
            g.values[idx] = sdf(p).clamp(-truncation, truncation);
            g.weights[idx] = 1.0;
        }
        g
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        [i, j, idx / (self.dims[0] * self.dims[1])]
    }

    pub fn position(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weights[self.index(i, j, k)]
    }
}

/// Projective signed distance of `p` seen from `frame`, if observed:
/// pixel inside the mask with valid depth, and `p` no deeper than one
/// truncation behind the surface.
pub fn projective_sdf(frame: &Frame, p: Vec3, truncation: f64) -> Option<f64> {
    let cam = &frame.intrinsics;
    let pc = frame.pose.camera_from_world().apply_point(p);
    if !(pc.z > 0.0) {
        return None;
    }
    let u = cam.fx * pc.x / pc.z + cam.cx;
    let v = cam.fy * pc.y / pc.z + cam.cy;
    if !(u >= 0.0 && v >= 0.0 && u < cam.width as f64 && v < cam.height as f64) {
        return None;
    }
    let (i, j) = (u.floor() as usize, v.floor() as usize);
    if !frame.usable(i, j) {
        return None;
    }
    let sdf = frame.image.depth_at(i, j) - pc.z;
    (sdf >= -truncation).then(|| sdf.min(truncation))
}

/// Fuse masked depth frames into a TSDF by running weighted averaging of
/// truncated projective distances. The grid covers the back-projected
/// points padded by one truncation plus one voxel.
pub fn tsdf_fuse(frames: &[Frame], voxel_size: f64, truncation: f64) -> Result<TsdfGrid, MeshError> {
    if !(voxel_size > 0.0) {
        return Err(MeshError::InvalidParameter("voxel size must be positive"));
    }
    if !(truncation >= voxel_size) {
        return Err(MeshError::InvalidParameter("truncation must be at least one voxel"));
    }
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for f in frames {
        let cam = &f.intrinsics;
        for j in 0..cam.height {
            for i in 0..cam.width {
                if f.usable(i, j) {
                    if let Ok(p) = unproject(i as f64 + 0.5, j as f64 + 0.5, f.image.depth_at(i, j), cam, &f.pose) {
                        lo = lo.min(p);
                        hi = hi.max(p);
                    }
                }
            }
        }
    }
    if !lo.is_finite() {
        return Err(MeshError::EmptyDepth);
    }
    let pad = Vec3::splat(truncation + voxel_size);
    let origin = lo - pad;
    let extent = hi + pad - origin;
    let dims = [extent.x, extent.y, extent.z].map(|e| (e / voxel_size).ceil() as usize + 1);
    let mut grid = TsdfGrid::new(origin, voxel_size, dims, truncation);
    grid.integrate(frames);
    Ok(grid)
}

impl TsdfGrid {
    /// Fold more frames into the running averages.
    pub fn integrate(&mut self, frames: &[Frame]) {
        let truncation = self.truncation;
        let fused: Vec<(f64, f64)> = (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let p = self.position(self.unflatten(idx));
                let (mut value, mut weight) = (self.values[idx], self.weights[idx]);
                for f in frames {
                    if let Some(sdf) = projective_sdf(f, p, truncation) {
                        value = (value * weight + sdf) / (weight + 1.0);
                        weight += 1.0;
                    }
                }
                (value, weight)
            })
            .collect();
        for (idx, (v, w)) in fused.into_iter().enumerate() {
            self.values[idx] = v;
            self.weights[idx] = w;
        }
    }
}
