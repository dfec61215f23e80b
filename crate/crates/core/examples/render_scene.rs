//! Render the bundled tabletop scene from the front camera, with and without supersampling.
//!
//! cargo run --release --example render_scene [out_dir]

use std::path::PathBuf;

use splatworld::agent::{render_view, GripperAgent, RenderSettings};
use splatworld::splat::RenderOptions;
use splatworld::{io, synthetic};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples-out/render".into());
    let world = synthetic::tabletop_world();
    let agent = GripperAgent::default();
    let camera = synthetic::front_camera(256, 192);
    for ss in [1, 4] {
        let settings = RenderSettings { width: 256, height: 192, options: RenderOptions { supersample_factor: ss, ..RenderOptions::default() } };
        let img = render_view(&world, &agent, &camera, &settings);
        let valid = img.depth().iter().filter(|d| **d > 0.0).count();
        println!("supersample {ss}: {valid} pixels with depth");
        io::save_rgbd(&out, &format!("{}_ss{ss}", camera.name), &img)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
