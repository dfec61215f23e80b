//! Command-line front end. Exit codes: 0 success, 1 verification rejected,
//! 2 usage error, 3 data error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agent::{execute_demo, render_view, RenderSettings};
use crate::augment::{
    augment_dataset, observation_name, replay_error_report, simulate, verify, AugmentStats, GridConfig, TransformSpec,
    DEFAULT_TAU,
};
use crate::fit::{optimize, FitConfig};
use crate::geometry::{Camera, Frame, Vec3};
use crate::io;
use crate::mesh::{clip_below_plane, marching_cubes, ransac_plane, tsdf_fuse};
use crate::splat::{init_from_rgbd, RenderOptions};

pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "splatworld", version, about = "Splat world model: fit, mesh, replay and augment demonstrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Directory with `<camera>.png` and `<camera>_depth.png`.
    #[arg(long)]
    pub frames: PathBuf,
    /// Directory with `<camera>.png` masks.
    #[arg(long)]
    pub masks: PathBuf,
    /// JSON array of cameras.
    #[arg(long)]
    pub cameras: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit splats to masked RGB-D frames.
    Fit {
        #[command(flatten)]
        input: FrameArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7000)]
        iters: usize,
        #[arg(long)]
        lambda_depth: Option<f64>,
        #[arg(long)]
        lambda_n: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pixel stride when seeding splats from depth.
        #[arg(long, default_value_t = 2)]
        stride: usize,
    },
    /// Fuse masked depth into a mesh.
    Mesh {
        #[command(flatten)]
        input: FrameArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.005)]
        voxel: f64,
        #[arg(long, default_value_t = 0.02)]
        trunc: f64,
        /// Fit the table to unmasked depth and cut the mesh at it.
        #[arg(long)]
        table_clip: bool,
    },
    /// Render a scene camera to `<out>/<camera>.png` and `<camera>_depth.png`.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        camera: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        supersample: usize,
    },
    /// Replay a demonstration and report per-object goal errors.
    Replay {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also render every camera after each action next to the report.
        #[arg(long)]
        render: bool,
    },
    /// Generate transformed demonstrations and keep those that verify.
    Augment {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,0.15,-0.15")]
        xy: Vec<f64>,
        #[arg(long, default_value_t = 30.0)]
        env_rot_step: f64,
        #[arg(long, default_value_t = 20.0)]
        traj_rot_step: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0.30,0,0")]
        rot_center: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, env = "DREMA_THREADS")]
        jobs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        /// Skip rendering observations of accepted demonstrations.
        #[arg(long)]
        no_render: bool,
    },
    /// Replay and check the goal poses; exit 0 if accepted, 1 if rejected.
    Verify {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Count generated and accepted results in an augment output directory.
    Stats {
        #[arg(long)]
        results: PathBuf,
    },
}

/// One line of an augment run, stored as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub demo_id: String,
    pub spec_index: usize,
    pub spec: TransformSpec,
    pub accepted: bool,
    pub errors: BTreeMap<String, f64>,
    pub max_error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutput {
    pub errors: BTreeMap<String, f64>,
    pub mean_error: f64,
    pub accepted: bool,
}

enum Outcome {
    Done,
    Rejected,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::Rejected) => EXIT_REJECTED,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| path.display().to_string())
}

fn load_frames(input: &FrameArgs) -> Result<(Vec<Camera>, Vec<Frame>)> {
    let cameras = io::load_cameras(&input.cameras)?;
    if cameras.is_empty() {
        bail!("{}: no cameras", input.cameras.display());
    }
    let mut frames = Vec::new();
    for c in &cameras {
        let image = io::load_rgbd(input.frames.join(format!("{}.png", c.name)), input.frames.join(format!("{}_depth.png", c.name)))?;
        let mask = io::load_mask(input.masks.join(format!("{}.png", c.name)))?;
        if image.dims() != (c.intrinsics.width, c.intrinsics.height) {
            bail!("camera {}: image is {:?}, intrinsics say {}x{}", c.name, image.dims(), c.intrinsics.width, c.intrinsics.height);
        }
        frames.push(Frame::new(image, mask, c.intrinsics, c.pose).with_context(|| format!("camera {}", c.name))?);
    }
    Ok((cameras, frames))
}

fn vec3_arg(v: &[f64], name: &str) -> Result<Vec3> {
    match v {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        [x, y] => Ok(Vec3::new(*x, *y, 0.0)),
        _ => Err(usage(format!("--{name} takes 2 or 3 comma-separated numbers"))),
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = jobs.unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| usage(e.to_string()))
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Fit { input, out, iters, lambda_depth, lambda_n, seed, stride } => {
            let mut cfg = FitConfig { iterations: iters, seed, ..FitConfig::default() };
            if let Some(l) = lambda_depth {
                cfg.lambda_depth = l;
            }
            if let Some(l) = lambda_n {
                cfg.lambda_normal = l;
            }
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let (_, frames) = load_frames(&input)?;
            let init = init_from_rgbd(&frames, stride)?;
            let fit = optimize(&frames, &init, &cfg)?;
            io::save_ply(&out, &fit.set)?;
            println!("{}", serde_json::json!({"splats": fit.set.len(), "initial": fit.initial.total, "final": fit.final_loss.total}));
        }
        Command::Mesh { input, out, voxel, trunc, table_clip } => {
            if !(voxel > 0.0 && trunc >= voxel) {
                return Err(usage("need voxel > 0 and trunc >= voxel"));
            }
            let (_, frames) = load_frames(&input)?;
            let grid = tsdf_fuse(&frames, voxel, trunc)?;
            let mut mesh = marching_cubes(&grid, 0.0)?;
            if table_clip {
                let (object, table) = split_points(&frames);
                let fit = ransac_plane(&table, 500, voxel, 0).context("table plane")?;
                let mut plane = fit.plane;
                let centroid = object.iter().fold(Vec3::ZERO, |a, p| a + *p) * (1.0 / object.len().max(1) as f64);
                if plane.signed_distance(centroid) < 0.0 {
                    plane = crate::mesh::Plane { normal: -plane.normal, offset: -plane.offset };
                }
                mesh = clip_below_plane(&mesh, &plane, 0.25 * voxel);
            }
            io::save_obj(&out, &mesh)?;
            println!("{}", serde_json::json!({"vertices": mesh.vertices.len(), "triangles": mesh.triangles.len()}));
        }
        Command::Render { scene, camera, out, width, height, supersample } => {
            if width == 0 || height == 0 || supersample == 0 {
                return Err(usage("width, height and supersample must be positive"));
            }
            let scene = io::load_scene(&scene)?;
            let cam = scene.camera(&camera).ok_or_else(|| usage(format!("no camera named {camera:?}")))?;
            let settings = RenderSettings { width, height, options: RenderOptions { supersample_factor: supersample, ..RenderOptions::default() } };
            let img = render_view(&scene.world, &scene.agent, cam, &settings);
            io::save_rgbd(&out, &camera, &img)?;
        }
        Command::Replay { scene, demo, out, render } => {
            let scene = io::load_scene(&scene)?;
            let demo = io::load_demo(&demo, true)?;
            demo.validate()?;
            let report = replay_error_report(&demo, &scene.world, &scene.agent).map_err(|e| anyhow!(e))?;
            let accepted = report.errors.values().all(|e| *e < DEFAULT_TAU);
            write_json(&out, &ReplayOutput { errors: report.errors, mean_error: report.mean_error, accepted })?;
            if render {
                let dir = out.parent().unwrap_or(Path::new(""));
                let mut world = scene.world.clone();
                crate::augment::stage(&mut world, &demo);
                let run = execute_demo(&mut world, &mut scene.agent.clone(), &demo.actions, &scene.cameras, Some(&RenderSettings::default()));
                for o in &run.observations {
                    io::save_rgbd(dir, &observation_name(o), &o.image)?;
                }
            }
        }
        Command::Augment { scene, demos, out, xy, env_rot_step, traj_rot_step, rot_center, tau, jobs, seed: _, width, height, no_render } => {
            let cfg = GridConfig {
                xy_offsets: xy,
                env_rot_center: vec3_arg(&rot_center, "rot-center")?,
                env_rot_step,
                traj_rot_step,
                tau,
                ..GridConfig::default()
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let pool = thread_pool(jobs)?;
            let scene = io::load_scene(&scene)?;
            let (ids, list) = load_demo_dir(&demos)?;
            let settings = RenderSettings { width, height, ..RenderSettings::default() };
            let render = (!no_render).then_some(&settings);
            let (results, stats) = pool.install(|| augment_dataset(&scene.world, &scene.agent, &list, &cfg, &scene.cameras, render))?;
            for r in &results {
                let dir = out.join(&ids[r.demo_index]).join(r.spec_index.to_string());
                let rec = ResultRecord {
                    demo_id: ids[r.demo_index].clone(),
                    spec_index: r.spec_index,
                    spec: r.spec,
                    accepted: r.accepted,
                    errors: r.errors.clone(),
                    max_error: r.max_error.is_finite().then_some(r.max_error),
                    failure: r.failure.clone(),
                };
                write_json(&dir.join("result.json"), &rec)?;
                if r.accepted {
                    io::save_demo(dir.join("demo.json"), &r.demo)?;
                    for o in &r.observations {
                        io::save_rgbd(&dir, &observation_name(o), &o.image)?;
                    }
                }
            }
            write_json(&out.join("stats.json"), &stats)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
        Command::Verify { demo, scene, tau } => {
            let scene = io::load_scene(&scene)?;
            let demo = io::load_demo(&demo, true)?;
            demo.validate()?;
            let sim = simulate(&scene.world, &scene.agent, &demo).map_err(|e| anyhow!(e))?;
            let v = verify(&demo.goal_poses, &sim, &TransformSpec::replay(), tau)?;
            println!("{}", serde_json::to_string(&v)?);
            if !v.accepted {
                return Ok(Outcome::Rejected);
            }
        }
        Command::Stats { results } => {
            let stats = collect_stats(&results)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
    }
    Ok(Outcome::Done)
}

/// Object points (inside the masks) and table points (outside) from all frames.
fn split_points(frames: &[Frame]) -> (Vec<Vec3>, Vec<Vec3>) {
    let (mut object, mut table) = (Vec::new(), Vec::new());
    for f in frames {
        let cam = &f.intrinsics;
        for j in 0..cam.height {
            for i in 0..cam.width {
                let d = f.image.depth_at(i, j);
                if d <= 0.0 {
                    continue;
                }
                if let Ok(p) = crate::geometry::unproject(i as f64 + 0.5, j as f64 + 0.5, d, cam, &f.pose) {
                    if f.mask.get(i, j) {
                        object.push(p);
                    } else {
                        table.push(p);
                    }
                }
            }
        }
    }
    (object, table)
}

/// Every `*.json` in `dir`, sorted by name; ids are the file stems.
pub fn load_demo_dir(dir: &Path) -> Result<(Vec<String>, Vec<crate::augment::Demonstration>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| dir.display().to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("{}: no demonstrations", dir.display());
    }
    let mut ids = Vec::new();
    let mut demos = Vec::new();
    for p in paths {
        let d = io::load_demo(&p, true)?;
        d.validate().with_context(|| p.display().to_string())?;
        ids.push(p.file_stem().unwrap().to_string_lossy().into_owned());
        demos.push(d);
    }
    Ok((ids, demos))
}

/// Tally `result.json` files under `<dir>/<demo_id>/<spec_index>/`.
pub fn collect_stats(dir: &Path) -> Result<AugmentStats> {
    let (mut generated, mut accepted) = (0, 0);
    let mut demos: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| dir.display().to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    demos.sort();
    for d in demos {
        for e in std::fs::read_dir(&d).with_context(|| d.display().to_string())? {
            let path = e?.path().join("result.json");
            if !path.is_file() {
                continue;
            }
            let text = std::fs::read(&path).with_context(|| path.display().to_string())?;
            let rec: ResultRecord = serde_json::from_slice(&text).with_context(|| path.display().to_string())?;
            generated += 1;
            accepted += rec.accepted as usize;
        }
    }
    Ok(AugmentStats::from_counts(generated, accepted))
}
