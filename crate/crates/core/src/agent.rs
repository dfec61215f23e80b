//! Position-controlled parallel gripper acting inside a [`WorldState`].

use serde::{Deserialize, Serialize};

use crate::dynamics::{placed_hull_contact, DynamicsError, KinematicHull, PlacedHull, WorldState};
use crate::geometry::{Camera, RgbdImage, RigidTransform, UnitQuat, Vec3};
use crate::mesh::{ConvexHull, HullPolygon};
use crate::splat::{render_downsampled, GaussianSet, RenderOptions, SplatLayer};

/// One keyframe: end-effector target pose and gripper state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub et: Vec3,
    pub er: UnitQuat,
    pub open: bool,
    #[serde(default)]
    pub collide: bool,
}

impl Action {
    pub fn new(et: Vec3, er: UnitQuat, open: bool) -> Self {
        Self { et, er, open, collide: false }
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform::new(self.er, self.et)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub id: String,
    /// Object pose in the gripper frame.
    pub relative: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentEvent {
    Attach { action: usize, id: String },
    Detach { action: usize, id: String },
    Contact { action: usize, id: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("target unreachable: {0}")]
    UnreachableTarget(DynamicsError),
}

/// Gripper frame: origin at the point between the fingertips, +z pointing
/// from the palm toward the fingertips.
#[derive(Debug, Clone)]
pub struct GripperAgent {
    pub pose: RigidTransform,
    pub open: bool,
    pub splats: GaussianSet,
    /// Closed-finger block; collides only while the gripper is closed.
    pub finger_hull: ConvexHull,
    finger_polygons: Vec<HullPolygon>,
    /// Corners of the grasp box in the gripper frame.
    pub grasp_region: (Vec3, Vec3),
    pub attached: Option<Attachment>,
    pub max_step_t: f64,
    pub max_step_r: f64,
}

impl Default for GripperAgent {
    fn default() -> Self {
        Self::new(RigidTransform::new(UnitQuat::from_axis_angle(Vec3::X, std::f64::consts::PI), Vec3::new(0.3, 0.0, 0.3)))
    }
}

impl GripperAgent {
    pub fn new(pose: RigidTransform) -> Self {
        let finger_hull = ConvexHull::cuboid(Vec3::new(0.0, 0.0, -0.02), Vec3::new(0.012, 0.012, 0.03));
        let finger_polygons = finger_hull.polygons();
        Self {
            pose,
            open: true,
            splats: GaussianSet::default(),
            finger_hull,
            finger_polygons,
            grasp_region: (Vec3::splat(-0.025), Vec3::splat(0.025)),
            attached: None,
            max_step_t: 0.002,
            max_step_r: 0.02,
        }
    }

    pub fn with_finger_hull(mut self, hull: ConvexHull) -> Self {
        self.finger_polygons = hull.polygons();
        self.finger_hull = hull;
        self
    }

    fn grasp_hull(&self) -> PlacedHull {
        let (lo, hi) = self.grasp_region;
        let box_hull = ConvexHull::cuboid((lo + hi) * 0.5, (hi - lo) * 0.5);
        PlacedHull::from_hull(&box_hull, &self.pose)
    }

    /// Object to pick up: the closest (by origin distance) non-fixed object
    /// whose hull meets the grasp region, ties broken by id.
    pub fn grasp_candidate(&self, world: &WorldState) -> Option<usize> {
        let region = self.grasp_hull();
        let mut best: Option<(f64, usize)> = None;
        for (i, o) in world.objects.iter().enumerate() {
            if o.is_static() {
                continue;
            }
            let placed = PlacedHull::new(&o.hull, &o.polygons, &o.pose());
            if placed_hull_contact(&region, &placed, 0.0).is_empty() {
                continue;
            }
            let d = o.state.position.distance(self.pose.translation);
            best = match best {
                Some((bd, bi)) if bd < d || (bd == d && world.objects[bi].id <= o.id) => Some((bd, bi)),
                _ => Some((d, i)),
            };
        }
        best.map(|(_, i)| i)
    }
}

/// Straight-line translation and constant-speed slerp from `a` to `b`.
/// Excludes `a`, ends with `b` exactly.
pub fn interpolate_waypoints(a: &RigidTransform, b: &RigidTransform, max_step_t: f64, max_step_r: f64) -> Vec<RigidTransform> {
    let dist = a.translation.distance(b.translation);
    let angle = a.rotation.angle_to(b.rotation);
    let steps = |x: f64, m: f64| if m > 0.0 { (x / m - 1e-9).ceil().max(1.0) as usize } else { 1 };
    let n = steps(dist, max_step_t).max(steps(angle, max_step_r));
    (1..=n)
        .map(|k| {
            if k == n {
                return *b;
            }
            let s = k as f64 / n as f64;
            RigidTransform::new(a.rotation.slerp(b.rotation, s), a.translation.lerp(b.translation, s))
        })
        .collect()
}

/// Move the gripper to the action's pose one physics step per waypoint,
/// then apply the gripper command.
pub fn execute_action(world: &mut WorldState, agent: &mut GripperAgent, action: &Action, index: usize) -> Result<Vec<AgentEvent>, AgentError> {
    let mut events = Vec::new();
    let held = agent.attached.as_ref().and_then(|a| world.object_index(&a.id));
    let mut touched = vec![false; world.objects.len()];
    for wp in interpolate_waypoints(&agent.pose, &action.pose(), agent.max_step_t, agent.max_step_r) {
        if let (Some(i), Some(att)) = (held, agent.attached.as_ref()) {
            world.drive(i, wp.compose(&att.relative));
        }
        let mut kin = Vec::new();
        if !agent.open {
            kin.push(KinematicHull {
                hull: agent.finger_hull.clone(),
                polygons: agent.finger_polygons.clone(),
                from: agent.pose,
                to: wp,
                ignore: held,
            });
        }
        world.step_with(&kin).map_err(AgentError::UnreachableTarget)?;
        agent.pose = wp;
        if !agent.open {
            let fingers = PlacedHull::new(&agent.finger_hull, &agent.finger_polygons, &agent.pose);
            for (i, o) in world.objects.iter().enumerate() {
                if Some(i) == held || touched[i] {
                    continue;
                }
                let placed = PlacedHull::new(&o.hull, &o.polygons, &o.pose());
                if !placed_hull_contact(&fingers, &placed, 1e-3).is_empty() {
                    touched[i] = true;
                    events.push(AgentEvent::Contact { action: index, id: o.id.clone() });
                }
            }
        }
    }
    if agent.open && !action.open {
        agent.open = false;
        if let Some(i) = agent.grasp_candidate(world) {
            let o = &mut world.objects[i];
            let relative = agent.pose.inverse().compose(&o.pose());
            o.set_pose(agent.pose.compose(&relative));
            events.push(AgentEvent::Attach { action: index, id: o.id.clone() });
            agent.attached = Some(Attachment { id: o.id.clone(), relative });
        }
    } else if !agent.open && action.open {
        agent.open = true;
        if let Some(att) = agent.attached.take() {
            if let Some(i) = world.object_index(&att.id) {
                world.release(i);
            }
            events.push(AgentEvent::Detach { action: index, id: att.id });
        }
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    pub options: RenderOptions,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self { width: 128, height: 128, options: RenderOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub action: usize,
    pub camera: String,
    pub image: RgbdImage,
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    /// Every object's pose after the last action has settled.
    pub goals: Vec<(String, RigidTransform)>,
    pub observations: Vec<Observation>,
    pub events: Vec<AgentEvent>,
    /// Index of the failed action, if any; observations up to it are kept.
    pub failure: Option<(usize, AgentError)>,
}

pub const SETTLE_STEPS: usize = 2400;
pub const SETTLE_LINEAR: f64 = 1e-3;
pub const SETTLE_ANGULAR: f64 = 1e-2;

fn settle(world: &mut WorldState) -> Result<(), AgentError> {
    world.settle(SETTLE_STEPS, SETTLE_LINEAR, SETTLE_ANGULAR).map_err(AgentError::UnreachableTarget)?;
    Ok(())
}

/// Render the scene (and the gripper's splats, if any) from `camera`.
pub fn render_view(world: &WorldState, agent: &GripperAgent, camera: &Camera, settings: &RenderSettings) -> RgbdImage {
    let mut layers = vec![SplatLayer::world(&world.background_splats)];
    layers.extend(world.objects.iter().map(|o| SplatLayer::new(&o.splats, o.pose())));
    if !agent.splats.is_empty() {
        layers.push(SplatLayer::new(&agent.splats, agent.pose));
    }
    render_downsampled(&layers, &camera.intrinsics, &camera.pose, settings.width, settings.height, &settings.options)
        .expect("positive render size")
}

/// Settle the world, run all actions, settle again and record goals.
/// With `render`, every camera is rendered after each action.
pub fn execute_demo(
    world: &mut WorldState,
    agent: &mut GripperAgent,
    actions: &[Action],
    cameras: &[Camera],
    render: Option<&RenderSettings>,
) -> DemoRun {
    let mut run = DemoRun { goals: Vec::new(), observations: Vec::new(), events: Vec::new(), failure: None };
    if let Err(e) = settle(world) {
        run.failure = Some((0, e));
        run.goals = world.poses();
        return run;
    }
    for (k, a) in actions.iter().enumerate() {
        match execute_action(world, agent, a, k) {
            Ok(ev) => run.events.extend(ev),
            Err(e) => {
                run.failure = Some((k, e));
                break;
            }
        }
        if let Some(settings) = render {
            for cam in cameras {
                run.observations.push(Observation { action: k, camera: cam.name.clone(), image: render_view(world, agent, cam, settings) });
            }
        }
    }
    if run.failure.is_none() {
        if let Err(e) = settle(world) {
            run.failure = Some((actions.len(), e));
        }
    }
    run.goals = world.poses();
    run
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_pose_single_waypoint() {
        let p = RigidTransform::new(UnitQuat::rotation_z(0.3), Vec3::new(0.1, 0.2, 0.3));
        assert_eq!(interpolate_waypoints(&p, &p, 0.01, 0.1), vec![p]);
    }

    #[test]
    fn straight_move_even_spacing() {
        let a = RigidTransform::from_translation(Vec3::new(0.2, 0.0, 0.1));
        let b = RigidTransform::from_translation(Vec3::new(0.3, 0.0, 0.1));
        let w = interpolate_waypoints(&a, &b, 0.01, 0.1);
        assert_eq!(w.len(), 10);
        assert_eq!(*w.last().unwrap(), b);
        let mut prev = a.translation;
        for p in &w {
            assert!((p.translation.distance(prev) - 0.01).abs() < 1e-12);
            prev = p.translation;
        }
    }

    #[test]
    fn rotation_constant_speed() {
        let a = RigidTransform::IDENTITY;
        let b = RigidTransform::from_rotation(UnitQuat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), std::f64::consts::FRAC_PI_2));
        let w = interpolate_waypoints(&a, &b, 0.01, 0.1);
        assert_eq!(w.len(), 16);
        let mut prev = a.rotation;
        let steps: Vec<f64> = w
            .iter()
            .map(|p| {
                let s = prev.angle_to(p.rotation);
                prev = p.rotation;
                s
            })
            .collect();
        for s in &steps {
            assert!((s - steps[0]).abs() < 1e-9);
            assert!(*s <= 0.1);
        }
    }
}
