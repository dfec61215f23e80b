//! Write the tabletop scene and a recorded demonstration to disk, then drive
//! the command-line interface over them: verify, render, replay and augment.
//!
//! cargo run --release --example scene_files [out_dir]

use std::path::PathBuf;

use splatworld::agent::GripperAgent;
use splatworld::augment::record_demo;
use splatworld::io::{self, Scene};
use splatworld::{cli, synthetic};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples-out/scene_files".into());
    let scene_path = out.join("scene").join("scene.json");
    let scene = Scene { world: synthetic::tabletop_world(), cameras: vec![synthetic::front_camera(96, 72)], agent: GripperAgent::default() };
    io::save_scene(&scene_path, &scene)?;

    let scene = io::load_scene(&scene_path)?;
    let demo = record_demo(&scene.world, &scene.agent, "push", synthetic::push_actions()).map_err(anyhow::Error::msg)?;
    let demo_path = out.join("demos").join("push.json");
    io::save_demo(&demo_path, &demo)?;

    let s = |p: &PathBuf| p.display().to_string();
    let runs: [Vec<String>; 4] = [
        vec!["verify".into(), "--demo".into(), s(&demo_path), "--scene".into(), s(&scene_path)],
        vec!["render".into(), "--scene".into(), s(&scene_path), "--camera".into(), "front".into(), "--out".into(), s(&out.join("render"))],
        vec!["replay".into(), "--scene".into(), s(&scene_path), "--demo".into(), s(&demo_path), "--out".into(), s(&out.join("replay"))],
        vec![
            "augment".into(), "--scene".into(), s(&scene_path), "--demos".into(), s(&out.join("demos")),
            "--out".into(), s(&out.join("dataset")), "--width".into(), "64".into(), "--height".into(), "48".into(),
        ],
    ];
    for args in runs {
        let code = cli::run(std::iter::once("splatworld".to_string()).chain(args.iter().cloned()));
        println!("splatworld {} -> exit {code}", args[0]);
    }
    println!("wrote {}", out.display());
    Ok(())
}
