//! Drop the tabletop objects onto the table, push one with the closed gripper
//! and print every object's displacement.
//!
//! cargo run --release --example simulate_push

use splatworld::agent::{execute_demo, GripperAgent};
use splatworld::synthetic;

fn main() -> anyhow::Result<()> {
    let mut world = synthetic::tabletop_world();
    let start = world.poses();
    let mut agent = GripperAgent::default();
    let run = execute_demo(&mut world, &mut agent, &synthetic::push_actions(), &[], None);
    if let Some((k, e)) = run.failure {
        anyhow::bail!("action {k} failed: {e}");
    }
    for event in &run.events {
        println!("{event:?}");
    }
    for ((id, a), (_, b)) in start.iter().zip(&run.goals) {
        println!("{id}: moved {:.4} m, turned {:.2} deg", a.translation.distance(b.translation), a.rotation.angle_to(b.rotation).to_degrees());
    }
    Ok(())
}
