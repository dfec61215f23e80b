use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::vec3::{Mat3, Vec3};

/// Unit quaternion rotation, stored as `[w, x, y, z]` with `w >= 0`.
///
/// Every constructor normalizes; the sign is canonicalized so equal
/// rotations compare equal in the common case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes `(w, x, y, z)`. Returns `None` if the norm is zero or not finite.
    pub fn try_new(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 1e-12) {
            return None;
        }
        // already unit: keep the bits so save/load round trips exactly
        let inv = if (n - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { 1.0 / n };
        let s = if w < 0.0 { -inv } else { inv };
        Some(Self { w: w * s, x: x * s, y: y * s, z: z * s })
    }

    /// Panics on a zero quaternion; use [`UnitQuat::try_new`] for untrusted input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::try_new(w, x, y, z).expect("quaternion with zero norm")
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector_part(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let Some(a) = axis.try_normalize() else {
            return Self::IDENTITY;
        };
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation about +z by `angle` radians.
    pub fn rotation_z(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::Z, angle)
    }

    /// Exponential map of a rotation vector (axis × angle).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let theta = v.norm();
        if theta < 1e-8 {
            // second-order series keeps the map smooth near zero
            let h = v * 0.5;
            return Self::new(1.0 - h.norm_squared() * 0.5, h.x, h.y, h.z);
        }
        Self::from_axis_angle(v / theta, theta)
    }

    /// Logarithm map: rotation vector with angle in `[0, π]`.
    pub fn to_rotation_vector(self) -> Vec3 {
        let v = self.vector_part();
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(self) -> f64 {
        2.0 * self.vector_part().norm().atan2(self.w.abs())
    }

    /// Angle of the relative rotation `self⁻¹ · other`.
    pub fn angle_to(self, other: UnitQuat) -> f64 {
        (self.inverse() * other).angle()
    }

    pub fn inverse(self) -> Self {
        // conjugate keeps w, so no re-canonicalization needed
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = self.vector_part();
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn to_matrix(self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    /// Quaternion of a proper rotation matrix (Shepperd's method).
    pub fn from_matrix(m: &Mat3) -> Self {
        let m = &m.0;
        let tr = m[0][0] + m[1][1] + m[2][2];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Self::new(0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Self::new((m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Self::new((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s)
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Self::new((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s)
        }
    }

    /// Rotation whose third column (local +z) is `normal`. The tangent frame
    /// is a deterministic function of the normal.
    pub fn from_normal(normal: Vec3) -> Self {
        let n = normal.normalize();
        let t = n.any_orthogonal();
        let b = n.cross(t);
        Self::from_matrix(&Mat3::from_cols(t, b, n))
    }

    /// Constant-speed spherical interpolation along the shorter arc.
    pub fn slerp(self, other: UnitQuat, t: f64) -> Self {
        let mut o = other.to_array();
        let a = self.to_array();
        let mut d: f64 = a.iter().zip(&o).map(|(p, q)| p * q).sum();
        if d < 0.0 {
            o.iter_mut().for_each(|v| *v = -*v);
            d = -d;
        }
        if d > 1.0 - 1e-12 {
            let l: Vec<f64> = a.iter().zip(&o).map(|(p, q)| p + (q - p) * t).collect();
            return Self::new(l[0], l[1], l[2], l[3]);
        }
        let theta = d.min(1.0).acos();
        let s = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        Self::new(
            wa * a[0] + wb * o[0],
            wa * a[1] + wb * o[1],
            wa * a[2] + wb * o[2],
            wa * a[3] + wb * o[3],
        )
    }

    /// Integrate an angular velocity (world frame) over `dt`.
    pub fn integrate(self, omega: Vec3, dt: f64) -> Self {
        if omega == Vec3::ZERO {
            return self;
        }
        let (w, v) = (self.w, self.vector_part());
        let h = omega * (0.5 * dt);
        let dw = -h.dot(v);
        let dv = h * w + h.cross(v);
        Self::new(w + dw, v.x + dv.x, v.y + dv.y, v.z + dv.z)
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, o: UnitQuat) -> UnitQuat {
        let (a, b) = (self, o);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        let n2 = w * w + x * x + y * y + z * z;
        if (n2 - 1.0).abs() <= 8.0 * f64::EPSILON {
            let s = if w < 0.0 { -1.0 } else { 1.0 };
            return UnitQuat { w: w * s, x: x * s, y: y * s, z: z * s };
        }
        UnitQuat::new(w, x, y, z)
    }
}

impl Mul<Vec3> for UnitQuat {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.rotate(v)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("quaternion has zero or non-finite norm")]
pub struct ZeroQuaternion;

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = ZeroQuaternion;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        UnitQuat::try_new(a[0], a[1], a[2], a[3]).ok_or(ZeroQuaternion)
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn canonical_sign() {
        let q = UnitQuat::new(-0.5, 0.5, 0.5, 0.5);
        assert!(q.w() >= 0.0);
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rejected() {
        assert!(UnitQuat::try_new(0.0, 0.0, 0.0, 0.0).is_none());
        assert!(UnitQuat::try_from([0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn rz90_maps_x_to_y() {
        let v = UnitQuat::rotation_z(FRAC_PI_2).rotate(Vec3::X);
        assert!((v - Vec3::Y).norm() < 1e-15);
    }

    #[test]
    fn matrix_roundtrip() {
        let q = UnitQuat::from_axis_angle(Vec3::new(0.2, -0.7, 0.4), 2.5);
        let back = UnitQuat::from_matrix(&q.to_matrix());
        assert!(q.angle_to(back) < 1e-12);
        let v = Vec3::new(0.3, 0.1, -2.0);
        assert!((q.to_matrix().mul_vec(v) - q.rotate(v)).norm() < 1e-14);
    }

    #[test]
    fn log_exp_roundtrip() {
        for angle in [1e-10, 0.3, 2.0, PI - 1e-6] {
            let q = UnitQuat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), angle);
            let back = UnitQuat::from_rotation_vector(q.to_rotation_vector());
            assert!(q.angle_to(back) < 1e-9, "angle {angle}");
        }
    }

    #[test]
    fn from_normal_third_column() {
        let n = Vec3::new(0.3, -0.4, 0.8).normalize();
        let m = UnitQuat::from_normal(n).to_matrix();
        assert!((m.col(2) - n).norm() < 1e-12);
    }

    #[test]
    fn slerp_endpoints() {
        let a = UnitQuat::rotation_z(0.1);
        let b = UnitQuat::from_axis_angle(Vec3::X, 1.2);
        assert!(a.slerp(b, 0.0).angle_to(a) < 1e-12);
        assert!(a.slerp(b, 1.0).angle_to(b) < 1e-12);
    }
}
