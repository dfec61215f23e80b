//! Fuse depth views of a sphere resting on a table into a TSDF, extract a mesh,
//! cut away the table with a RANSAC plane and build the collision hull.
//!
//! cargo run --release --example mesh_object [out_dir]

use std::path::PathBuf;

use splatworld::geometry::{unproject, CameraIntrinsics, Vec3};
use splatworld::io;
use splatworld::mesh::{clip_below_plane, convex_hull, marching_cubes, ransac_plane, tsdf_fuse};
use splatworld::synthetic;

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples-out/mesh".into());
    let cam = CameraIntrinsics::new(200.0, 200.0, 80.0, 60.0, 160, 120)?;
    let center = Vec3::new(0.0, 0.0, 0.05);
    let (radius, voxel) = (0.08, 0.005);
    let poses = synthetic::orbit_poses(center, 0.5, 10, 0.6);
    let frames: Vec<_> = poses.iter().map(|p| synthetic::sphere_frame(center, radius, [200, 60, 40], &cam, p)).collect();

    let grid = tsdf_fuse(&frames, voxel, 4.0 * voxel)?;
    let mesh = marching_cubes(&grid, 0.0)?;
    println!("mesh: {} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());

    // table points seen by a second set of plane views
    let table: Vec<_> = poses
        .iter()
        .map(|p| synthetic::plane_frame(Vec3::Z, 0.0, [90; 3], &cam, p))
        .flat_map(|f| {
            let d = f.image.depth().to_vec();
            (0..d.len())
                .step_by(7)
                .filter(|&k| d[k] > 0.0)
                .filter_map(|k| unproject((k % 160) as f64 + 0.5, (k / 160) as f64 + 0.5, d[k], &f.intrinsics, &f.pose).ok())
                .collect::<Vec<_>>()
        })
        .collect();
    let fit = ransac_plane(&table, 500, voxel, 1)?;
    println!("table plane: normal {:?}, {} inliers", fit.plane.normal, fit.inliers.len());

    let clipped = clip_below_plane(&mesh, &fit.plane, 0.25 * voxel);
    let hull = convex_hull(&clipped.vertices)?;
    println!("hull: {} vertices, volume {:.3e} m^3", hull.vertices.len(), hull.volume());
    io::save_obj(out.join("sphere.obj"), &clipped)?;
    println!("wrote {}", out.display());
    Ok(())
}
