use serde::{Deserialize, Serialize};

use super::quat::UnitQuat;
use super::vec3::Vec3;

/// Proper rigid motion `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    #[serde(rename = "q")]
    pub rotation: UnitQuat,
    #[serde(rename = "t")]
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: UnitQuat::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: UnitQuat, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(UnitQuat::IDENTITY, t)
    }

    pub fn from_rotation(r: UnitQuat) -> Self {
        Self::new(r, Vec3::ZERO)
    }

    /// `x ↦ R(x − pivot) + pivot`.
    pub fn rotate_about_point(r: UnitQuat, pivot: Vec3) -> Self {
        Self::new(r, pivot - r.rotate(pivot))
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation.rotate(other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -inv.rotate(self.translation))
    }

    /// Homogeneous 4×4 matrix, row-major.
    pub fn to_matrix4(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_matrix().0;
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.translation.is_finite() && self.rotation.to_array().iter().all(|v| v.is_finite())
    }
}

/// Free-function form of [`RigidTransform::compose`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

/// Free-function form of [`RigidTransform::rotate_about_point`].
pub fn rotate_about_point(r: UnitQuat, pivot: Vec3) -> RigidTransform {
    RigidTransform::rotate_about_point(r, pivot)
}
