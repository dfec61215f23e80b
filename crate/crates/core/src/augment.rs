//! Equivariant transforms of demonstrations, replay and verification.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{execute_demo, Action, GripperAgent, Observation, RenderSettings};
use crate::dynamics::WorldState;
use crate::geometry::{Camera, RigidTransform, UnitQuat, Vec3};
use crate::mesh::Plane;
use crate::splat::world_splats;

/// Positional accuracy a transformed demonstration must reach (m).
pub const DEFAULT_TAU: f64 = 0.015;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("demonstration has no actions")]
    EmptyActionList,
    #[error("object ids differ between recorded and simulated goals")]
    IdMismatch,
    #[error("rotation step {0}° does not divide 360°")]
    InvalidStep(f64),
    #[error("invalid grid config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demonstration {
    pub task: String,
    pub actions: Vec<Action>,
    pub initial_poses: BTreeMap<String, RigidTransform>,
    pub goal_poses: BTreeMap<String, RigidTransform>,
    #[serde(default)]
    pub observations: Vec<String>,
}

impl Demonstration {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.actions.is_empty() {
            return Err(AugmentError::EmptyActionList);
        }
        if self.goal_poses.keys().any(|k| !self.initial_poses.contains_key(k)) {
            return Err(AugmentError::IdMismatch);
        }
        Ok(())
    }

    /// The same demonstration with every pose and action moved by `t`.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            task: self.task.clone(),
            actions: self.actions.iter().map(|a| transform_action(a, t)).collect(),
            initial_poses: self.initial_poses.iter().map(|(k, p)| (k.clone(), t.compose(p))).collect(),
            goal_poses: self.goal_poses.iter().map(|(k, p)| (k.clone(), t.compose(p))).collect(),
            observations: Vec::new(),
        }
    }
}

fn transform_action(a: &Action, t: &RigidTransform) -> Action {
    Action { et: t.apply_point(a.et), er: t.rotation * a.er, ..*a }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    Replay,
    RotoTranslation,
    ObjectRotation,
}

/// `x ↦ R(x − P) + P + t`. For object rotations `P` is the last
/// end-effector position of the demonstration it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub rotation: UnitQuat,
    pub translation: Vec3,
    pub point: Vec3,
    /// Rotation about +z in degrees, for reporting.
    pub angle_deg: f64,
}

impl TransformSpec {
    pub fn replay() -> Self {
        Self { kind: TransformKind::Replay, rotation: UnitQuat::IDENTITY, translation: Vec3::ZERO, point: Vec3::ZERO, angle_deg: 0.0 }
    }

    pub fn translation(t: Vec3) -> Self {
        Self { kind: TransformKind::RotoTranslation, translation: t, ..Self::replay() }
    }

    pub fn rotation_z(angle_deg: f64, point: Vec3) -> Self {
        Self {
            kind: TransformKind::RotoTranslation,
            rotation: UnitQuat::rotation_z(angle_deg.to_radians()),
            point,
            angle_deg,
            ..Self::replay()
        }
    }

    pub fn object_rotation(angle_deg: f64) -> Self {
        Self { kind: TransformKind::ObjectRotation, ..Self::rotation_z(angle_deg, Vec3::ZERO) }
    }

    pub fn transform(&self) -> RigidTransform {
        if self.kind == TransformKind::Replay {
            return RigidTransform::IDENTITY;
        }
        RigidTransform::from_translation(self.translation).compose(&RigidTransform::rotate_about_point(self.rotation, self.point))
    }

    /// Bind an object rotation to the demonstration's last end-effector position.
    pub fn bound_to(&self, demo: &Demonstration) -> Result<Self, AugmentError> {
        match self.kind {
            TransformKind::ObjectRotation => {
                let last = demo.actions.last().ok_or(AugmentError::EmptyActionList)?;
                Ok(Self { point: last.et, translation: Vec3::ZERO, ..*self })
            }
            _ => Ok(*self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub xy_offsets: Vec<f64>,
    pub env_rot_center: Vec3,
    pub env_rot_step: f64,
    pub traj_rot_step: f64,
    pub tau: f64,
    /// Also pair every translation with every environment rotation.
    pub compose: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            xy_offsets: vec![0.0, 0.15, -0.15],
            env_rot_center: Vec3::new(0.30, 0.0, 0.0),
            env_rot_step: 30.0,
            traj_rot_step: 20.0,
            tau: DEFAULT_TAU,
            compose: false,
        }
    }
}

fn turns(step: f64) -> Result<usize, AugmentError> {
    let n = 360.0 / step;
    if !(step > 0.0) || !n.is_finite() || (n - n.round()).abs() > 1e-9 {
        return Err(AugmentError::InvalidStep(step));
    }
    Ok(n.round() as usize)
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        turns(self.env_rot_step)?;
        turns(self.traj_rot_step)?;
        if !(self.tau > 0.0) {
            return Err(AugmentError::InvalidConfig("tau must be positive"));
        }
        if self.xy_offsets.iter().any(|v| !v.is_finite()) {
            return Err(AugmentError::InvalidConfig("offsets must be finite"));
        }
        Ok(())
    }
}

/// Replay, then xy translations (row-major), environment rotations and
/// object rotations by ascending angle. The identity appears only once.
pub fn generate_grid(cfg: &GridConfig) -> Result<Vec<TransformSpec>, AugmentError> {
    cfg.validate()?;
    let mut out = vec![TransformSpec::replay()];
    let mut shifts = Vec::new();
    for &dx in &cfg.xy_offsets {
        for &dy in &cfg.xy_offsets {
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            shifts.push(Vec3::new(dx, dy, 0.0));
        }
    }
    out.extend(shifts.iter().map(|&t| TransformSpec::translation(t)));
    let env: Vec<f64> = (1..turns(cfg.env_rot_step)?).map(|k| k as f64 * cfg.env_rot_step).collect();
    out.extend(env.iter().map(|&a| TransformSpec::rotation_z(a, cfg.env_rot_center)));
    out.extend((1..turns(cfg.traj_rot_step)?).map(|k| TransformSpec::object_rotation(k as f64 * cfg.traj_rot_step)));
    if cfg.compose {
        for &t in &shifts {
            for &a in &env {
                out.push(TransformSpec { translation: t, ..TransformSpec::rotation_z(a, cfg.env_rot_center) });
            }
        }
    }
    Ok(out)
}

/// Place every object listed in the demonstration at its initial pose, at rest.
pub fn stage(world: &mut WorldState, demo: &Demonstration) {
    for o in world.objects.iter_mut() {
        if let Some(p) = demo.initial_poses.get(&o.id) {
            o.set_pose(*p);
        }
    }
}

fn transform_plane(plane: &Plane, t: &RigidTransform) -> Plane {
    let normal = t.apply_vector(plane.normal);
    let anchor = t.apply_point(plane.normal * plane.offset);
    Plane { normal, offset: normal.dot(anchor) }
}

/// Move the whole environment and the demonstration by a TransformSpec.
/// The world is staged at the transformed initial poses; the gripper base is
/// left where it is.
pub fn roto_translate(world: &WorldState, demo: &Demonstration, spec: &TransformSpec) -> (WorldState, Demonstration) {
    let mut world = world.clone();
    if spec.kind == TransformKind::Replay {
        stage(&mut world, demo);
        return (world, demo.clone());
    }
    let t = spec.transform();
    let demo = demo.transformed(&t);
    for o in world.objects.iter_mut() {
        if !demo.initial_poses.contains_key(&o.id) {
            let p = t.compose(&o.pose());
            o.set_pose(p);
        }
    }
    stage(&mut world, &demo);
    world.background_splats = world_splats(&t, &world.background_splats);
    world.table = transform_plane(&world.table, &t);
    world.workspace = world.workspace.transformed(&t);
    (world, demo)
}

/// Rotate objects and actions about the last end-effector position; the
/// environment stays put.
pub fn rotate_objects_about_final(world: &WorldState, demo: &Demonstration, angle_deg: f64) -> Result<(WorldState, Demonstration), AugmentError> {
    let spec = TransformSpec::object_rotation(angle_deg).bound_to(demo)?;
    let demo = demo.transformed(&spec.transform());
    let mut world = world.clone();
    stage(&mut world, &demo);
    Ok((world, demo))
}

/// Apply a spec of any kind.
pub fn apply_spec(world: &WorldState, demo: &Demonstration, spec: &TransformSpec) -> Result<(WorldState, Demonstration, TransformSpec), AugmentError> {
    demo.validate()?;
    let spec = spec.bound_to(demo)?;
    let (w, d) = match spec.kind {
        TransformKind::ObjectRotation => rotate_objects_about_final(world, demo, spec.angle_deg)?,
        _ => roto_translate(world, demo, &spec),
    };
    Ok((w, d, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub accepted: bool,
    pub errors: BTreeMap<String, f64>,
    pub max_error: f64,
}

/// Compare simulated goals with the recorded goals moved by `spec`.
/// Only positions are checked; every error must be below `tau`.
pub fn verify(
    recorded: &BTreeMap<String, RigidTransform>,
    simulated: &BTreeMap<String, RigidTransform>,
    spec: &TransformSpec,
    tau: f64,
) -> Result<Verification, AugmentError> {
    if recorded.len() != simulated.len() || recorded.keys().any(|k| !simulated.contains_key(k)) {
        return Err(AugmentError::IdMismatch);
    }
    let t = spec.transform();
    let errors: BTreeMap<String, f64> = recorded
        .iter()
        .map(|(k, l)| (k.clone(), simulated[k].translation.distance(t.apply_point(l.translation))))
        .collect();
    let max_error = errors.values().cloned().fold(0.0, f64::max);
    Ok(Verification { accepted: errors.values().all(|e| *e < tau), errors, max_error })
}

/// Run a demonstration's actions from its initial poses and return the
/// simulated final poses of the objects it tracks.
pub fn simulate(world: &WorldState, agent: &GripperAgent, demo: &Demonstration) -> Result<BTreeMap<String, RigidTransform>, String> {
    let mut w = world.clone();
    stage(&mut w, demo);
    let mut a = agent.clone();
    let run = execute_demo(&mut w, &mut a, &demo.actions, &[], None);
    if let Some((k, e)) = run.failure {
        return Err(format!("action {k}: {e}"));
    }
    Ok(run.goals.into_iter().filter(|(k, _)| demo.initial_poses.contains_key(k)).collect())
}

/// Record a demonstration by running `actions` from the world's current poses.
pub fn record_demo(world: &WorldState, agent: &GripperAgent, task: &str, actions: Vec<Action>) -> Result<Demonstration, String> {
    let mut demo = Demonstration {
        task: task.to_string(),
        actions,
        initial_poses: world.poses().into_iter().filter(|(k, _)| !world.object(k).is_some_and(|o| o.is_static())).collect(),
        goal_poses: BTreeMap::new(),
        observations: Vec::new(),
    };
    demo.goal_poses = simulate(world, agent, &demo)?;
    Ok(demo)
}

#[derive(Debug, Clone)]
pub struct AugmentResult {
    pub demo_index: usize,
    pub spec_index: usize,
    pub spec: TransformSpec,
    pub accepted: bool,
    pub errors: BTreeMap<String, f64>,
    pub max_error: f64,
    /// Transformed demonstration with simulated goals.
    pub demo: Demonstration,
    pub observations: Vec<Observation>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub generated: usize,
    pub accepted: usize,
    pub acceptance_ratio: f64,
}

impl AugmentStats {
    pub fn from_counts(generated: usize, accepted: usize) -> Self {
        let acceptance_ratio = if generated == 0 { 0.0 } else { accepted as f64 / generated as f64 };
        Self { generated, accepted, acceptance_ratio }
    }
}

fn run_one(
    world: &WorldState,
    agent: &GripperAgent,
    demo: &Demonstration,
    spec: &TransformSpec,
    tau: f64,
    cameras: &[Camera],
    render: Option<&RenderSettings>,
) -> Result<(TransformSpec, Verification, Demonstration, Vec<Observation>), String> {
    let (w, d, spec) = apply_spec(world, demo, spec).map_err(|e| e.to_string())?;
    let simulated = simulate(&w, agent, &d)?;
    let v = verify(&demo.goal_poses, &simulated, &spec, tau).map_err(|e| e.to_string())?;
    let mut out = Demonstration { goal_poses: simulated, ..d };
    let mut observations = Vec::new();
    if v.accepted {
        if let Some(settings) = render {
            let mut w2 = w.clone();
            let run = execute_demo(&mut w2, &mut agent.clone(), &out.actions, cameras, Some(settings));
            observations = run.observations;
            out.observations = observations.iter().map(|o| observation_name(o)).collect();
        }
    }
    Ok((spec, v, out, observations))
}

/// File stem for an observation: `<camera>_<action index>`.
pub fn observation_name(o: &Observation) -> String {
    format!("{}_{:03}", o.camera, o.action)
}

/// Transform, replay and verify every demonstration under every spec of the
/// grid. Items run in parallel; results come back ordered by
/// (demo index, spec index). Failures are recorded, never fatal.
pub fn augment_dataset(
    world: &WorldState,
    agent: &GripperAgent,
    demos: &[Demonstration],
    cfg: &GridConfig,
    cameras: &[Camera],
    render: Option<&RenderSettings>,
) -> Result<(Vec<AugmentResult>, AugmentStats), AugmentError> {
    let specs = generate_grid(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..demos.len()).flat_map(|d| (0..specs.len()).map(move |s| (d, s))).collect();
    let results: Vec<AugmentResult> = jobs
        .par_iter()
        .map(|&(di, si)| {
            let demo = &demos[di];
            match run_one(world, agent, demo, &specs[si], cfg.tau, cameras, render) {
                Ok((spec, v, d, observations)) => AugmentResult {
                    demo_index: di,
                    spec_index: si,
                    spec,
                    accepted: v.accepted,
                    errors: v.errors,
                    max_error: v.max_error,
                    demo: d,
                    observations,
                    failure: None,
                },
                Err(e) => AugmentResult {
                    demo_index: di,
                    spec_index: si,
                    spec: specs[si],
                    accepted: false,
                    errors: BTreeMap::new(),
                    max_error: f64::INFINITY,
                    demo: demo.clone(),
                    observations: Vec::new(),
                    failure: Some(e),
                },
            }
        })
        .collect();
    let accepted = results.iter().filter(|r| r.accepted).count();
    let stats = AugmentStats::from_counts(results.len(), accepted);
    Ok((results, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub errors: BTreeMap<String, f64>,
    pub mean_error: f64,
}

/// Replay a demonstration and report how far each object ends up from its
/// recorded goal.
pub fn replay_error_report(demo: &Demonstration, world: &WorldState, agent: &GripperAgent) -> Result<ReplayReport, String> {
    let simulated = simulate(world, agent, demo)?;
    let mut errors = BTreeMap::new();
    for (k, g) in &demo.goal_poses {
        let s = simulated.get(k).ok_or_else(|| format!("object {k:?} missing from world"))?;
        errors.insert(k.clone(), s.translation.distance(g.translation));
    }
    let mean_error = if errors.is_empty() { 0.0 } else { errors.values().sum::<f64>() / errors.len() as f64 };
    Ok(ReplayReport { errors, mean_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_37() {
        let g = generate_grid(&GridConfig::default()).unwrap();
        assert_eq!(g.len(), 37);
        let count = |k| g.iter().filter(|s| s.kind == k).count();
        assert_eq!(count(TransformKind::Replay), 1);
        assert_eq!(count(TransformKind::ObjectRotation), 17);
        assert_eq!(g.iter().filter(|s| s.kind == TransformKind::RotoTranslation && s.angle_deg == 0.0).count(), 8);
        assert_eq!(g.iter().filter(|s| s.kind == TransformKind::RotoTranslation && s.angle_deg != 0.0).count(), 11);
    }

    #[test]
    fn degenerate_grids() {
        let one = GridConfig { xy_offsets: vec![0.0], env_rot_step: 360.0, traj_rot_step: 360.0, ..Default::default() };
        assert_eq!(generate_grid(&one).unwrap(), vec![TransformSpec::replay()]);
        let quarter = GridConfig { xy_offsets: vec![0.0], env_rot_step: 90.0, traj_rot_step: 360.0, ..Default::default() };
        let g = generate_grid(&quarter).unwrap();
        assert_eq!(g.iter().map(|s| s.angle_deg).collect::<Vec<_>>(), vec![0.0, 90.0, 180.0, 270.0]);
        let bad = GridConfig { env_rot_step: 25.0, ..Default::default() };
        assert_eq!(generate_grid(&bad), Err(AugmentError::InvalidStep(25.0)));
    }

    #[test]
    fn threshold_straddle() {
        let rec: BTreeMap<String, RigidTransform> = [("a".to_string(), RigidTransform::from_translation(Vec3::new(0.3, 0.0, 0.02)))].into();
        let shifted = |d: f64| -> BTreeMap<String, RigidTransform> {
            [("a".to_string(), RigidTransform::from_translation(Vec3::new(0.3 + d, 0.0, 0.02)))].into()
        };
        let spec = TransformSpec::replay();
        assert!(verify(&rec, &shifted(0.0), &spec, DEFAULT_TAU).unwrap().accepted);
        assert!(verify(&rec, &shifted(0.014), &spec, DEFAULT_TAU).unwrap().accepted);
        assert!(!verify(&rec, &shifted(0.016), &spec, DEFAULT_TAU).unwrap().accepted);
        let other: BTreeMap<String, RigidTransform> = [("b".to_string(), RigidTransform::IDENTITY)].into();
        assert_eq!(verify(&rec, &other, &spec, DEFAULT_TAU), Err(AugmentError::IdMismatch));
    }
}
