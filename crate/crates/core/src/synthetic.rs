//! Analytic scenes for tests, examples and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::Action;
use crate::dynamics::{ObjectAsset, PhysicalParams, WorldState};
use crate::geometry::{
    unproject_camera_frame, Camera, CameraIntrinsics, CameraPose, Frame, Mask, RgbdImage, RigidTransform, UnitQuat, Vec3,
};
use crate::splat::{Gaussian2D, GaussianSet};

/// `count` cameras evenly spaced in azimuth around `target`, at `distance`
/// and `elevation` radians above the horizontal, looking at the target.
pub fn orbit_poses(target: Vec3, distance: f64, count: usize, elevation: f64) -> Vec<CameraPose> {
    (0..count)
        .map(|k| {
            let az = std::f64::consts::TAU * k as f64 / count as f64;
            let eye = target
                + Vec3::new(az.cos() * elevation.cos(), az.sin() * elevation.cos(), elevation.sin()) * distance;
            CameraPose::look_at(eye, target, Vec3::Z)
        })
        .collect()
}

/// Ray-cast a solid sphere. Pixels that hit are masked, colored and carry
/// the camera-frame depth of the first intersection.
pub fn sphere_frame(center: Vec3, radius: f64, color: [u8; 3], cam: &CameraIntrinsics, pose: &CameraPose) -> Frame {
    let c = pose.camera_from_world().apply_point(center);
    ray_cast_frame(cam, pose, color, |dir| {
        // |t·dir − c|² = r², dir has unit z so t is the camera depth
        let a = dir.norm_squared();
        let b = -2.0 * dir.dot(c);
        let k = c.norm_squared() - radius * radius;
        let disc = b * b - 4.0 * a * k;
        if disc < 0.0 {
            return None;
        }
        let t = (-b - disc.sqrt()) / (2.0 * a);
        (t > 0.0).then_some(t)
    })
}

/// Infinite plane `n·x = d` (world frame) seen by the camera.
pub fn plane_frame(normal: Vec3, d: f64, color: [u8; 3], cam: &CameraIntrinsics, pose: &CameraPose) -> Frame {
    let cw = pose.camera_from_world();
    let n = cw.apply_vector(normal);
    let dc = d - normal.dot(pose.center());
    ray_cast_frame(cam, pose, color, |dir| {
        let den = n.dot(dir);
        if den.abs() < 1e-12 {
            return None;
        }
        let t = dc / den;
        (t > 0.0).then_some(t)
    })
}

fn ray_cast_frame(
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    color: [u8; 3],
    hit: impl Fn(Vec3) -> Option<f64>,
) -> Frame {
    let mut img = RgbdImage::filled(cam.width, cam.height, [0, 0, 0]);
    let mut mask = vec![false; cam.pixel_count()];
    for j in 0..cam.height {
        for i in 0..cam.width {
            let dir = unproject_camera_frame(i as f64 + 0.5, j as f64 + 0.5, 1.0, cam).expect("unit depth");
            if let Some(t) = hit(dir) {
                img.set(i, j, color, t);
                mask[j * cam.width + i] = true;
            }
        }
    }
    let mask = Mask::new(cam.width, cam.height, mask).expect("mask dims");
    Frame::new(img, mask, *cam, *pose).expect("frame dims")
}

/// `n` splats tiling the surface of a sphere, facing outward, with a smooth
/// color gradient. Deterministic for a given seed.
pub fn sphere_splats(center: Vec3, radius: f64, n: usize, seed: u64) -> GaussianSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    // disk radius chosen so the n disks cover the surface with overlap
    let s = radius * (4.0 / n as f64).sqrt() * 1.1;
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            let dir = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            let jitter = rng.gen_range(-0.05..0.05);
            let rgb = [
                (0.5 + 0.4 * dir.x + jitter).clamp(0.05, 0.95),
                (0.5 + 0.4 * dir.y).clamp(0.05, 0.95),
                (0.5 + 0.4 * dir.z).clamp(0.05, 0.95),
            ];
            Gaussian2D::with_color(center + dir * radius, UnitQuat::from_normal(dir), [s, s], 0.95, rgb)
        })
        .collect()
}

/// Splats covering the faces of a box centered on the origin, `per_edge`²
/// per face, in a flat color.
pub fn box_splats(half: Vec3, per_edge: usize, rgb: [f64; 3]) -> GaussianSet {
    let n = per_edge.max(1);
    let mut out = Vec::with_capacity(6 * n * n);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [1.0, -1.0] {
            let mut normal = [0.0; 3];
            normal[axis] = sign;
            let normal = Vec3::from_array(normal);
            let (hu, hv) = (half[u], half[v]);
            let s = [hu / n as f64 * 1.2, hv / n as f64 * 1.2];
            let mut basis_u = [0.0; 3];
            basis_u[u] = 1.0;
            let basis_u = Vec3::from_array(basis_u);
            let rot = UnitQuat::from_matrix(&crate::geometry::Mat3::from_cols(basis_u, normal.cross(basis_u), normal));
            for a in 0..n {
                for b in 0..n {
                    let mut p = [0.0; 3];
                    p[axis] = sign * half[axis];
                    p[u] = -hu + hu * (2 * a + 1) as f64 / n as f64;
                    p[v] = -hv + hv * (2 * b + 1) as f64 / n as f64;
                    out.push(Gaussian2D::with_color(Vec3::from_array(p), rot, s, 0.95, rgb));
                }
            }
        }
    }
    GaussianSet::new(out)
}

/// Flat checkerboard of splats on the plane z = 0 covering `[-half, half]²`
/// around `center`.
pub fn table_splats(center: Vec3, half: f64, per_edge: usize) -> GaussianSet {
    let n = per_edge.max(1);
    let step = 2.0 * half / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let p = center + Vec3::new(-half + step * (a as f64 + 0.5), -half + step * (b as f64 + 0.5), 0.0);
            let shade = if (a + b) % 2 == 0 { 0.55 } else { 0.4 };
            out.push(Gaussian2D::with_color(p, UnitQuat::IDENTITY, [step * 0.6, step * 0.6], 0.98, [shade, shade * 0.9, shade * 0.8]));
        }
    }
    GaussianSet::new(out)
}

/// Three boxes on a table around (0.3, 0, 0): a red cube, a green cube and a
/// blue slab.
pub fn tabletop_world() -> WorldState {
    let mut w = WorldState::default();
    w.background_splats = table_splats(Vec3::new(0.3, 0.0, 0.0), 0.3, 24);
    let items = [
        ("red", Vec3::splat(0.02), Vec3::new(0.3, 0.0, 0.02), 0.0, [0.85, 0.15, 0.1]),
        ("green", Vec3::splat(0.02), Vec3::new(0.36, 0.01, 0.02), 0.3, [0.1, 0.8, 0.2]),
        ("blue", Vec3::new(0.02, 0.03, 0.025), Vec3::new(0.3, 0.1, 0.025), 0.1, [0.15, 0.2, 0.9]),
    ];
    for (id, half, at, yaw, rgb) in items {
        let pose = RigidTransform::new(UnitQuat::rotation_z(yaw), at);
        let mut o = ObjectAsset::cuboid(id, half, PhysicalParams::default(), pose).expect("valid box");
        o.splats = box_splats(half, 4, rgb);
        w.objects.push(o);
    }
    w
}

/// Gripper pointing straight down.
pub fn downward() -> UnitQuat {
    UnitQuat::from_axis_angle(Vec3::X, std::f64::consts::PI)
}

/// Close the gripper behind the red cube and push it into the green one.
pub fn push_actions() -> Vec<Action> {
    let down = downward();
    vec![
        Action::new(Vec3::new(0.2, 0.0, 0.1), down, true),
        Action::new(Vec3::new(0.2, 0.0, 0.1), down, false),
        Action::new(Vec3::new(0.2, 0.0, 0.02), down, false),
        Action::new(Vec3::new(0.38, 0.02, 0.02), down, false),
        Action::new(Vec3::new(0.38, 0.02, 0.1), down, true),
    ]
}

/// Pick up the blue slab and put it down next to the cubes.
pub fn pick_place_actions() -> Vec<Action> {
    let down = downward();
    vec![
        Action::new(Vec3::new(0.3, 0.1, 0.12), down, true),
        Action::new(Vec3::new(0.3, 0.1, 0.025), down, true),
        Action::new(Vec3::new(0.3, 0.1, 0.025), down, false),
        Action::new(Vec3::new(0.3, 0.1, 0.12), down, false),
        Action::new(Vec3::new(0.22, -0.08, 0.12), down, false),
        Action::new(Vec3::new(0.22, -0.08, 0.03), down, false),
        Action::new(Vec3::new(0.22, -0.08, 0.03), down, true),
        Action::new(Vec3::new(0.22, -0.08, 0.12), down, true),
    ]
}

/// A camera in front of the table looking at (0.3, 0, 0).
pub fn front_camera(width: usize, height: usize) -> Camera {
    let f = 1.1 * width as f64;
    Camera {
        name: "front".to_string(),
        intrinsics: CameraIntrinsics::centered(f, width, height).expect("positive size"),
        pose: CameraPose::look_at(Vec3::new(0.85, 0.0, 0.45), Vec3::new(0.3, 0.0, 0.0), Vec3::Z),
    }
}
