//! Record a push demonstration, expand it over the default transform grid,
//! replay every variant in simulation and keep the ones that reach their goals.
//!
//! cargo run --release --example augment_demo

use splatworld::agent::GripperAgent;
use splatworld::augment::{augment_dataset, record_demo, GridConfig};
use splatworld::synthetic;

fn main() -> anyhow::Result<()> {
    let world = synthetic::tabletop_world();
    let agent = GripperAgent::default();
    let demos = vec![
        record_demo(&world, &agent, "push", synthetic::push_actions()).map_err(anyhow::Error::msg)?,
        record_demo(&world, &agent, "pick and place", synthetic::pick_place_actions()).map_err(anyhow::Error::msg)?,
    ];
    let (results, stats) = augment_dataset(&world, &agent, &demos, &GridConfig::default(), &[], None)?;
    for r in &results {
        let status = if r.accepted { "accepted" } else { "rejected" };
        println!("demo {} spec {:2}: {status} (max error {:.2e} m)", r.demo_index, r.spec_index, r.max_error);
    }
    println!("{} of {} variants accepted ({:.0}%)", stats.accepted, stats.generated, 100.0 * stats.acceptance_ratio);
    Ok(())
}
