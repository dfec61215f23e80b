//! Grasp an object, carry it across the table and release it, recording
//! front-camera observations along the way.
//!
//! cargo run --release --example pick_place [out_dir]

use std::path::PathBuf;

use splatworld::agent::{execute_demo, AgentEvent, GripperAgent, RenderSettings};
use splatworld::augment::observation_name;
use splatworld::{io, synthetic};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples-out/pick_place".into());
    let mut world = synthetic::tabletop_world();
    let mut agent = GripperAgent::default();
    let cameras = [synthetic::front_camera(128, 96)];
    let settings = RenderSettings { width: 128, height: 96, ..RenderSettings::default() };
    let run = execute_demo(&mut world, &mut agent, &synthetic::pick_place_actions(), &cameras, Some(&settings));
    if let Some((k, e)) = run.failure {
        anyhow::bail!("action {k} failed: {e}");
    }
    for event in &run.events {
        match event {
            AgentEvent::Attach { action, id } => println!("action {action}: grasped {id}"),
            AgentEvent::Detach { action, id } => println!("action {action}: released {id}"),
            AgentEvent::Contact { action, id } => println!("action {action}: touched {id}"),
        }
    }
    for (id, pose) in &run.goals {
        println!("{id} rests at {:?}", pose.translation);
    }
    for o in &run.observations {
        io::save_rgbd(&out, &observation_name(o), &o.image)?;
    }
    println!("wrote {} observations to {}", run.observations.len(), out.display());
    Ok(())
}
