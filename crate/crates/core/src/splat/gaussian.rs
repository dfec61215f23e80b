use crate::geometry::{RigidTransform, UnitQuat, Vec3};

/// Degree-0 spherical-harmonic constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
/// Degree-1 spherical-harmonic constant.
pub const SH_C1: f64 = 0.488_602_511_902_919_9;

/// Highest spherical-harmonic degree the renderer evaluates.
pub const MAX_SH_DEGREE: u8 = 1;

/// A flat (2D) Gaussian disk.
///
/// `center` lives in the owning object's local frame. The first two columns
/// of `rotation` span the disk, the third is its normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2D {
    pub center: Vec3,
    pub rotation: UnitQuat,
    /// Semi-axes `(s_u, s_v)` in meters.
    pub scale: [f64; 2],
    pub opacity: f64,
    /// DC spherical-harmonic coefficients per channel.
    pub sh_dc: [f64; 3],
    /// Degree-1 coefficients `[band][channel]`; ignored when the set is degree 0.
    pub sh_rest: [[f64; 3]; 3],
}

impl Gaussian2D {
    /// Degree-0 splat whose flat color is `rgb` (each channel in `[0, 1]`).
    pub fn with_color(center: Vec3, rotation: UnitQuat, scale: [f64; 2], opacity: f64, rgb: [f64; 3]) -> Self {
        Self {
            center,
            rotation,
            scale,
            opacity,
            sh_dc: rgb.map(rgb_to_dc),
            sh_rest: [[0.0; 3]; 3],
        }
    }

    pub fn normal(&self) -> Vec3 {
        self.rotation.to_matrix().col(2)
    }

    /// View-independent part of the color.
    pub fn base_color(&self) -> [f64; 3] {
        self.sh_dc.map(dc_to_rgb)
    }

    pub fn luminance(&self) -> f64 {
        let c = self.base_color();
        0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]
    }

    pub fn is_valid(&self) -> bool {
        self.scale.iter().all(|s| *s > 0.0 && s.is_finite())
            && (0.0..=1.0).contains(&self.opacity)
            && self.center.is_finite()
    }

    /// The same splat expressed in the frame `pose` maps into. Degree-1
    /// color turns with it.
    pub fn transformed(&self, pose: &RigidTransform) -> Self {
        let mut sh_rest = self.sh_rest;
        for ch in 0..3 {
            // band 1 is C1·(a·dir) with a = (-s2, -s0, s1)
            let s = [self.sh_rest[0][ch], self.sh_rest[1][ch], self.sh_rest[2][ch]];
            let a = pose.rotation.rotate(Vec3::new(-s[2], -s[0], s[1]));
            sh_rest[0][ch] = -a.y;
            sh_rest[1][ch] = a.z;
            sh_rest[2][ch] = -a.x;
        }
        Self {
            center: pose.apply_point(self.center),
            rotation: pose.rotation * self.rotation,
            sh_rest,
            ..*self
        }
    }
}

pub fn rgb_to_dc(c: f64) -> f64 {
    (c - 0.5) / SH_C0
}

pub fn dc_to_rgb(dc: f64) -> f64 {
    0.5 + SH_C0 * dc
}

/// Degree-1 basis values for a unit view direction, in band order.
pub fn sh1_basis(dir: Vec3) -> [f64; 3] {
    [-SH_C1 * dir.y, SH_C1 * dir.z, -SH_C1 * dir.x]
}

/// Ordered splat collection. The index of a splat is its identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianSet {
    pub gaussians: Vec<Gaussian2D>,
    pub sh_degree: u8,
}

impl GaussianSet {
    pub fn new(gaussians: Vec<Gaussian2D>) -> Self {
        Self { gaussians, sh_degree: 0 }
    }

    pub fn with_degree(gaussians: Vec<Gaussian2D>, sh_degree: u8) -> Self {
        Self { gaussians, sh_degree: sh_degree.min(MAX_SH_DEGREE) }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Gaussian2D> {
        self.gaussians.iter()
    }

    pub fn centers(&self) -> Vec<Vec3> {
        self.gaussians.iter().map(|g| g.center).collect()
    }

    /// Keep the splats at `indices` (ascending), preserving order.
    pub fn select(&self, indices: &[usize]) -> GaussianSet {
        GaussianSet {
            gaussians: indices.iter().map(|&i| self.gaussians[i]).collect(),
            sh_degree: self.sh_degree,
        }
    }

    /// Color of splat `g` seen along the unit direction `dir` (camera to splat).
    pub fn color_of(&self, g: &Gaussian2D, dir: Vec3) -> [f64; 3] {
        let mut c = g.base_color();
        if self.sh_degree >= 1 {
            let b = sh1_basis(dir);
            for (ch, cv) in c.iter_mut().enumerate() {
                *cv += (0..3).map(|k| b[k] * g.sh_rest[k][ch]).sum::<f64>();
            }
        }
        c
    }
}

impl FromIterator<Gaussian2D> for GaussianSet {
    fn from_iter<I: IntoIterator<Item = Gaussian2D>>(iter: I) -> Self {
        GaussianSet::new(iter.into_iter().collect())
    }
}

/// Place an object's local splats at `asset_pose`.
///
/// Centers move rigidly with the body (`p_world = R·p_local + μ`) and
/// orientations are premultiplied (`r_world = R·r`), degree-1 color with
/// them. For a pure translation
/// this is the plain center offset.
pub fn world_splats(asset_pose: &RigidTransform, set: &GaussianSet) -> GaussianSet {
    GaussianSet {
        gaussians: set.gaussians.iter().map(|g| g.transformed(asset_pose)).collect(),
        sh_degree: set.sh_degree,
    }
}
