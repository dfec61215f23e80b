use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::GripperAgent;
use crate::augment::Demonstration;
use crate::dynamics::{ObjectAsset, PhysicalParams, WorldState};
use crate::geometry::{Camera, RigidTransform, Vec3};
use crate::mesh::{convex_hull, Plane};

use super::{load_obj, load_ply, read_file, save_obj, save_ply, write_file, IoError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub id: String,
    pub splats: String,
    pub mesh: String,
    pub pose: RigidTransform,
    #[serde(default)]
    pub physical: PhysicalParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub normal: Vec3,
    pub d: f64,
}

/// An OBJ path or the hull's vertices inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorkspaceEntry {
    Path(String),
    Inline { vertices: Vec<Vec3> },
}

fn default_gravity() -> Vec3 {
    WorldState::default().gravity
}

fn default_dt() -> f64 {
    WorldState::default().dt
}

/// On-disk scene description. Paths are relative to the scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub objects: Vec<ObjectEntry>,
    pub table: TableEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<WorkspaceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_splats: Option<String>,
    #[serde(default)]
    pub cameras: Vec<Camera>,
    #[serde(default = "default_gravity")]
    pub gravity: Vec3,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_friction: Option<f64>,
    /// Gripper start pose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<RigidTransform>,
}

/// A loaded scene: the world, its cameras and the gripper in its start pose.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world: WorldState,
    pub cameras: Vec<Camera>,
    pub agent: GripperAgent,
}

impl Scene {
    pub fn camera(&self, name: &str) -> Option<&Camera> {
        self.cameras.iter().find(|c| c.name == name)
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let line = (inner.line() > 0).then_some(inner.line());
        IoError::parse(path, line, (field != ".").then_some(field), inner.to_string())
    })
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

pub fn parse_scene_file(bytes: &[u8], path: &Path) -> Result<SceneFile, IoError> {
    parse_json(bytes, path)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

fn existing(base: &Path, rel: &str, scene: &Path, field: String) -> Result<PathBuf, IoError> {
    let p = resolve(base, rel);
    if p.is_file() {
        Ok(p)
    } else {
        Err(IoError::parse(scene, None, Some(field), format!("referenced file {} does not exist", p.display())))
    }
}

/// Load a scene and every asset it references. Objects start at rest.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, IoError> {
    let path = path.as_ref();
    let file: SceneFile = parse_scene_file(&read_file(path)?, path)?;
    let base = path.parent().unwrap_or(Path::new(""));

    let mut seen = HashSet::new();
    for (k, o) in file.objects.iter().enumerate() {
        if !seen.insert(o.id.as_str()) {
            return Err(IoError::parse(path, None, Some(format!("objects[{k}].id")), format!("duplicate id {:?}", o.id)));
        }
    }
    let mut world = WorldState::default();
    for (k, o) in file.objects.iter().enumerate() {
        let splats = load_ply(existing(base, &o.splats, path, format!("objects[{k}].splats"))?)?;
        let mesh = load_obj(existing(base, &o.mesh, path, format!("objects[{k}].mesh"))?)?;
        let asset = ObjectAsset::new(o.id.clone(), splats, mesh, o.physical, o.pose)
            .map_err(|e| IoError::parse(path, None, Some(format!("objects[{k}]")), e.to_string()))?;
        world.objects.push(asset);
    }
    world.table = Plane::new(file.table.normal, file.table.d)
        .ok_or_else(|| IoError::parse(path, None, Some("table.normal".into()), "normal has zero length"))?;
    match &file.workspace {
        None => {}
        Some(WorkspaceEntry::Path(rel)) => {
            let mesh = load_obj(existing(base, rel, path, "workspace".into())?)?;
            world.workspace = convex_hull(&mesh.vertices).map_err(|e| IoError::parse(path, None, Some("workspace".into()), e.to_string()))?;
        }
        Some(WorkspaceEntry::Inline { vertices }) => {
            world.workspace = convex_hull(vertices).map_err(|e| IoError::parse(path, None, Some("workspace".into()), e.to_string()))?;
        }
    }
    if let Some(rel) = &file.background_splats {
        world.background_splats = load_ply(existing(base, rel, path, "background_splats".into())?)?;
    }
    world.gravity = file.gravity;
    world.dt = file.dt;
    if let Some(mu) = file.table_friction {
        world.table_friction = mu;
    }
    world.validate().map_err(|e| IoError::invalid(path, e))?;
    let agent = file.gripper.map(GripperAgent::new).unwrap_or_default();
    Ok(Scene { world, cameras: file.cameras, agent })
}

/// Write `path` plus `<id>.ply`, `<id>.obj` and `background.ply` next to it.
pub fn save_scene(path: impl AsRef<Path>, scene: &Scene) -> Result<(), IoError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let w = &scene.world;
    let mut objects = Vec::new();
    for o in &w.objects {
        let (splats, mesh) = (format!("{}.ply", o.id), format!("{}.obj", o.id));
        save_ply(base.join(&splats), &o.splats)?;
        save_obj(base.join(&mesh), &o.mesh)?;
        objects.push(ObjectEntry { id: o.id.clone(), splats, mesh, pose: o.pose(), physical: o.params });
    }
    let background_splats = if w.background_splats.is_empty() {
        None
    } else {
        save_ply(base.join("background.ply"), &w.background_splats)?;
        Some("background.ply".to_string())
    };
    let file = SceneFile {
        objects,
        table: TableEntry { normal: w.table.normal, d: w.table.offset },
        workspace: Some(WorkspaceEntry::Inline { vertices: sorted(&w.workspace.vertices) }),
        background_splats,
        cameras: scene.cameras.clone(),
        gravity: w.gravity,
        dt: w.dt,
        table_friction: Some(w.table_friction),
        gripper: Some(scene.agent.pose),
    };
    write_file(path, &to_json(&file))
}

fn sorted(v: &[Vec3]) -> Vec<Vec3> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.to_array().partial_cmp(&b.to_array()).expect("finite vertices"));
    v
}

const DEMO_KEYS: [&str; 5] = ["task", "actions", "initial_poses", "goal_poses", "observations"];
const ACTION_KEYS: [&str; 4] = ["et", "er", "open", "collide"];
const POSE_KEYS: [&str; 2] = ["t", "q"];

fn retain(v: &mut serde_json::Value, keys: &[&str]) {
    if let Some(m) = v.as_object_mut() {
        m.retain(|k, _| keys.contains(&k.as_str()));
    }
}

/// Parse a demonstration. Strict mode rejects unknown fields; lenient mode
/// drops them. Quaternions are normalized.
pub fn parse_demo(bytes: &[u8], path: &Path, strict: bool) -> Result<Demonstration, IoError> {
    if strict {
        return parse_json(bytes, path);
    }
    let mut v: serde_json::Value = parse_json(bytes, path)?;
    retain(&mut v, &DEMO_KEYS);
    if let Some(actions) = v.get_mut("actions").and_then(|a| a.as_array_mut()) {
        actions.iter_mut().for_each(|a| retain(a, &ACTION_KEYS));
    }
    for key in ["initial_poses", "goal_poses"] {
        if let Some(m) = v.get_mut(key).and_then(|m| m.as_object_mut()) {
            m.values_mut().for_each(|p| retain(p, &POSE_KEYS));
        }
    }
    let text = serde_json::to_vec(&v).expect("value");
    parse_json(&text, path)
}

pub fn load_demo(path: impl AsRef<Path>, strict: bool) -> Result<Demonstration, IoError> {
    let path = path.as_ref();
    parse_demo(&read_file(path)?, path, strict)
}

pub fn save_demo(path: impl AsRef<Path>, demo: &Demonstration) -> Result<(), IoError> {
    write_file(path.as_ref(), &to_json(demo))
}

/// A JSON array of cameras.
pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>, IoError> {
    let path = path.as_ref();
    parse_json(&read_file(path)?, path)
}

pub fn save_cameras(path: impl AsRef<Path>, cameras: &[Camera]) -> Result<(), IoError> {
    write_file(path.as_ref(), &to_json(&cameras))
}

