//! Fit surfel splats to eight synthetic RGB-D views of a sphere and save the result as PLY.
//!
//! cargo run --release --example fit_object [out_dir]

use std::path::PathBuf;

use splatworld::fit::{optimize, FitConfig};
use splatworld::geometry::{CameraIntrinsics, Frame, Mask, Vec3};
use splatworld::splat::{init_from_rgbd, rasterize_float, RenderOptions, SplatLayer};
use splatworld::{io, synthetic};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples-out/fit".into());
    let cam = CameraIntrinsics::new(80.0, 80.0, 32.0, 32.0, 64, 64)?;
    let truth = synthetic::sphere_splats(Vec3::ZERO, 0.1, 200, 1);
    let opts = RenderOptions { supersample_factor: 1, ..RenderOptions::default() };
    let frames = synthetic::orbit_poses(Vec3::ZERO, 0.45, 8, 0.35)
        .into_iter()
        .map(|pose| {
            let b = rasterize_float(&[SplatLayer::world(&truth)], &cam, &pose, &opts);
            let mask = Mask::new(64, 64, b.weight.iter().map(|w| *w > 0.5).collect())?;
            Ok(Frame::new(b.to_rgbd(), mask, cam, pose)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let init = init_from_rgbd(&frames, 3)?;
    let cfg = FitConfig { iterations: 1500, ..FitConfig::default() };
    let fit = optimize(&frames, &init, &cfg)?;
    println!("splats: {} initial, {} after pruning {}", init.len(), fit.set.len(), fit.pruned);
    println!("loss: {:.5} -> {:.5}", fit.initial.total, fit.final_loss.total);

    io::save_ply(out.join("sphere.ply"), &fit.set)?;
    for (k, f) in frames.iter().enumerate().take(2) {
        let b = rasterize_float(&[SplatLayer::world(&fit.set)], &cam, &f.pose, &opts);
        io::save_rgbd(&out, &format!("view_{k}"), &b.to_rgbd())?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
