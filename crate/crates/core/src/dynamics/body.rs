use serde::{Deserialize, Serialize};

use crate::geometry::{Mat3, RigidTransform, UnitQuat, Vec3};
use crate::mesh::{convex_hull, ConvexHull, HullPolygon, TriangleMesh};
use crate::splat::{world_splats, GaussianSet};

use super::DynamicsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Kilograms. Ignored for fixed bodies.
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
    pub fixed: bool,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { mass: 0.2, friction: 0.5, restitution: 0.0, fixed: false }
    }
}

impl PhysicalParams {
    pub fn fixed() -> Self {
        Self { fixed: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = (self.fixed || (self.mass > 0.0 && self.mass.is_finite()))
            && self.friction >= 0.0
            && self.friction.is_finite()
            && (0.0..=1.0).contains(&self.restitution);
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidParams)
        }
    }

    pub fn is_static(&self) -> bool {
        self.fixed || self.mass.is_infinite()
    }
}

/// Pose of the body frame plus velocities of the center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub orientation: UnitQuat,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(pose: RigidTransform) -> Self {
        Self { position: pose.translation, orientation: pose.rotation, ..Self::default() }
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform::new(self.orientation, self.position)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.angular_velocity.is_finite()
    }
}

/// Mass distribution of a uniform-density convex body, in its local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub volume: f64,
    pub center_of_mass: Vec3,
    /// Inertia tensor about the center of mass, for the body's mass.
    pub inertia: Mat3,
}

impl MassProperties {
    /// Integrate over tetrahedra fanned from the vertex centroid.
    pub fn of_hull(hull: &ConvexHull, mass: f64) -> Self {
        let o = hull.centroid();
        let mut volume = 0.0;
        let mut first = Vec3::ZERO;
        let mut second = Mat3::ZERO;
        for f in &hull.faces {
            let [a, b, c] = f.map(|i| hull.vertices[i as usize] - o);
            let det = a.dot(b.cross(c));
            volume += det / 6.0;
            first += (a + b + c) * (det / 24.0);
            let s = a + b + c;
            let cov = Mat3::outer(a, a).add(&Mat3::outer(b, b)).add(&Mat3::outer(c, c)).add(&Mat3::outer(s, s));
            second = second.add(&cov.scale(det / 120.0));
        }
        let com_rel = first / volume;
        // second moment about the center of mass
        let central = second.add(&Mat3::outer(com_rel, com_rel).scale(-volume));
        let density = mass / volume;
        let inertia = Mat3::IDENTITY.scale(central.trace()).add(&central.scale(-1.0)).scale(density);
        Self { volume, center_of_mass: o + com_rel, inertia }
    }
}

/// A simulated object: appearance, geometry and physical state.
#[derive(Debug, Clone)]
pub struct ObjectAsset {
    pub id: String,
    /// Splats in the body frame.
    pub splats: GaussianSet,
    /// Mesh in the body frame.
    pub mesh: TriangleMesh,
    pub hull: ConvexHull,
    pub params: PhysicalParams,
    pub state: RigidBodyState,
    pub(crate) mass: MassProperties,
    pub(crate) inv_inertia: Mat3,
    pub(crate) polygons: Vec<HullPolygon>,
    pub(crate) asleep: bool,
    pub(crate) still_steps: u32,
    pub(crate) drive: Option<RigidTransform>,
}

impl ObjectAsset {
    /// Body-frame geometry placed at `pose`. The collision hull is the convex
    /// hull of the mesh vertices.
    pub fn new(
        id: impl Into<String>,
        splats: GaussianSet,
        mesh: TriangleMesh,
        params: PhysicalParams,
        pose: RigidTransform,
    ) -> Result<Self, DynamicsError> {
        let hull = convex_hull(&mesh.vertices).map_err(DynamicsError::Hull)?;
        Self::with_hull(id, splats, mesh, hull, params, pose)
    }

    pub fn with_hull(
        id: impl Into<String>,
        splats: GaussianSet,
        mesh: TriangleMesh,
        hull: ConvexHull,
        params: PhysicalParams,
        pose: RigidTransform,
    ) -> Result<Self, DynamicsError> {
        params.validate()?;
        let mass = MassProperties::of_hull(&hull, if params.is_static() { 1.0 } else { params.mass });
        if !(mass.volume > 0.0) {
            return Err(DynamicsError::InvalidParams);
        }
        let inv_inertia = mass.inertia.inverse().ok_or(DynamicsError::InvalidParams)?;
        let polygons = hull.polygons();
        Ok(Self {
            id: id.into(),
            splats,
            mesh,
            hull,
            params,
            state: RigidBodyState::at_rest(pose),
            mass,
            inv_inertia,
            polygons,
            asleep: false,
            still_steps: 0,
            drive: None,
        })
    }

    /// Axis-aligned box centered on the body origin.
    pub fn cuboid(id: impl Into<String>, half: Vec3, params: PhysicalParams, pose: RigidTransform) -> Result<Self, DynamicsError> {
        let hull = ConvexHull::cuboid(Vec3::ZERO, half);
        let mesh = hull.to_mesh();
        Self::with_hull(id, GaussianSet::default(), mesh, hull, params, pose)
    }

    pub fn pose(&self) -> RigidTransform {
        self.state.pose()
    }

    pub fn set_pose(&mut self, pose: RigidTransform) {
        self.state = RigidBodyState::at_rest(pose);
        self.asleep = false;
        self.still_steps = 0;
    }

    pub fn mass_properties(&self) -> &MassProperties {
        &self.mass
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.pose().apply_point(self.mass.center_of_mass)
    }

    pub fn is_asleep(&self) -> bool {
        self.asleep
    }

    pub fn is_static(&self) -> bool {
        self.params.is_static()
    }

    pub(crate) fn inv_mass(&self) -> f64 {
        if self.is_static() {
            0.0
        } else {
            1.0 / self.params.mass
        }
    }

    pub(crate) fn inv_inertia_world(&self) -> Mat3 {
        if self.is_static() {
            return Mat3::ZERO;
        }
        let r = self.state.orientation.to_matrix();
        r.mul_mat(&self.inv_inertia).mul_mat(&r.transpose())
    }

    pub fn kinetic_energy(&self) -> f64 {
        if self.is_static() {
            return 0.0;
        }
        let r = self.state.orientation.to_matrix();
        let i_world = r.mul_mat(&self.mass.inertia).mul_mat(&r.transpose());
        let w = self.state.angular_velocity;
        0.5 * self.params.mass * self.state.velocity.norm_squared() + 0.5 * w.dot(i_world.mul_vec(w))
    }

    /// Splats placed in the world at the current pose.
    pub fn world_splats(&self) -> GaussianSet {
        world_splats(&self.pose(), &self.splats)
    }
}

/// Rigid motion of one body over a step: the change of the body origin
/// and the rotation applied about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDelta {
    pub translation: Vec3,
    pub rotation: UnitQuat,
}

impl PoseDelta {
    pub const IDENTITY: PoseDelta = PoseDelta { translation: Vec3::ZERO, rotation: UnitQuat::IDENTITY };

    pub fn between(from: &RigidTransform, to: &RigidTransform) -> Self {
        if from == to {
            return Self::IDENTITY;
        }
        Self { translation: to.translation - from.translation, rotation: to.rotation * from.rotation.inverse() }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Apply to a pose: rotate about its origin, then translate.
    pub fn apply(&self, pose: &RigidTransform) -> RigidTransform {
        RigidTransform::new(self.rotation * pose.rotation, pose.translation + self.translation)
    }
}

/// Carry world-space splats along with their body: rotate each about the
/// old body origin, then shift by the translation.
pub fn sync_splats(splats: &GaussianSet, origin: Vec3, delta: &PoseDelta) -> GaussianSet {
    if delta.is_identity() {
        return splats.clone();
    }
    let about = RigidTransform::rotate_about_point(delta.rotation, origin);
    let motion = RigidTransform::from_translation(delta.translation).compose(&about);
    world_splats(&motion, splats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_inertia() {
        let hull = ConvexHull::cuboid(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, 1.0, 1.5));
        let m = MassProperties::of_hull(&hull, 2.0);
        assert!((m.volume - 6.0).abs() < 1e-12);
        assert!((m.center_of_mass - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        // box: I = m/12 (b² + c²) etc.
        let expect = [2.0 / 12.0 * (4.0 + 9.0), 2.0 / 12.0 * (1.0 + 9.0), 2.0 / 12.0 * (1.0 + 4.0)];
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { expect[i] } else { 0.0 };
                assert!((m.inertia.0[i][j] - e).abs() < 1e-12, "{i}{j}: {}", m.inertia.0[i][j]);
            }
        }
    }

    #[test]
    fn sync_matches_new_pose() {
        use crate::splat::Gaussian2D;
        let local = GaussianSet::new(vec![
            Gaussian2D::with_color(Vec3::new(0.1, 0.0, 0.02), UnitQuat::IDENTITY, [0.01, 0.01], 0.8, [0.5; 3]),
            Gaussian2D::with_color(Vec3::new(-0.03, 0.05, 0.0), UnitQuat::rotation_z(0.4), [0.02, 0.01], 0.6, [0.2; 3]),
        ]);
        let old = RigidTransform::new(UnitQuat::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.7), Vec3::new(0.3, -0.1, 0.2));
        let new = RigidTransform::new(UnitQuat::rotation_z(1.1), Vec3::new(0.35, 0.0, 0.1));
        let delta = PoseDelta::between(&old, &new);
        let synced = sync_splats(&world_splats(&old, &local), old.translation, &delta);
        let expect = world_splats(&new, &local);
        for (a, b) in synced.iter().zip(expect.iter()) {
            assert!((a.center - b.center).norm() < 1e-12);
            assert!(a.rotation.angle_to(b.rotation) < 1e-9);
        }
        let shift = PoseDelta { translation: Vec3::new(0.15, 0.0, 0.0), rotation: UnitQuat::IDENTITY };
        let moved = sync_splats(&local, Vec3::ZERO, &shift);
        assert_eq!(moved.gaussians[0].center, local.gaussians[0].center + Vec3::new(0.15, 0.0, 0.0));
        assert_eq!(sync_splats(&local, Vec3::ZERO, &PoseDelta::IDENTITY), local);
    }

    #[test]
    fn params_validation() {
        assert!(PhysicalParams::default().validate().is_ok());
        assert!(PhysicalParams { mass: 0.0, ..Default::default() }.validate().is_err());
        assert!(PhysicalParams { restitution: 1.5, ..Default::default() }.validate().is_err());
        assert!(PhysicalParams { mass: f64::INFINITY, ..Default::default() }.is_static());
    }
}
