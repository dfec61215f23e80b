#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splatworld::fit::{loss, loss_gradients, FitConfig, FitTarget, SplatGrad};
use splatworld::geometry::{CameraIntrinsics, CameraPose, UnitQuat, Vec3};
use splatworld::splat::{rasterize_float, Gaussian2D, GaussianSet, RenderOptions, SplatLayer};

pub fn small_cam() -> CameraIntrinsics {
    CameraIntrinsics::new(60.0, 60.0, 24.0, 24.0, 48, 48).unwrap()
}

/// Random splats in front of an identity camera, disks tilted at most 60°
/// away from facing it.
pub fn random_scene(rng: &mut ChaCha8Rng, n: usize, degree: u8) -> GaussianSet {
    let gs = (0..n)
        .map(|_| {
            let z = rng.gen_range(0.8..1.2);
            let center = Vec3::new(rng.gen_range(-0.2..0.2) * z, rng.gen_range(-0.2..0.2) * z, z);
            let tilt = Vec3::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), -1.0);
            let spin = UnitQuat::from_axis_angle(Vec3::Z, rng.gen_range(0.0..std::f64::consts::TAU));
            let rotation = UnitQuat::from_normal(tilt) * spin;
            let scale = [rng.gen_range(0.03..0.1), rng.gen_range(0.03..0.1)];
            let rgb = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
            let mut g = Gaussian2D::with_color(center, rotation, scale, rng.gen_range(0.3..0.95), rgb);
            if degree >= 1 {
                for row in g.sh_rest.iter_mut() {
                    for v in row.iter_mut() {
                        *v = rng.gen_range(-0.2..0.2);
                    }
                }
            }
            g
        })
        .collect();
    GaussianSet::with_degree(gs, degree)
}

/// Render options without footprint cutoff or opacity floor, so the loss
/// is smooth in every parameter.
pub fn smooth_render() -> RenderOptions {
    RenderOptions { supersample_factor: 1, opacity_floor: 0.0, cutoff_sigma: 1e3, ..RenderOptions::default() }
}

pub fn smooth_config() -> FitConfig {
    FitConfig { render: smooth_render(), ..FitConfig::default() }
}

/// Gradient-check scene: `set` is evaluated against the render of an
/// unrelated random scene, masked to pixels where both are well covered.
pub struct GradScene {
    pub set: GaussianSet,
    pub target: FitTarget,
}

pub fn grad_scene(seed: u64) -> GradScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = small_cam();
    let pose = CameraPose::default();
    let opts = smooth_render();
    loop {
        let degree = rng.gen_range(0..=1u8);
        let set = random_scene(&mut rng, 10, degree);
        let gt_set = random_scene(&mut rng, 12, 0);
        let mut depths: Vec<f64> = set.iter().map(|g| g.center.z).collect();
        depths.sort_by(f64::total_cmp);
        if depths.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let base = rasterize_float(&[SplatLayer::world(&set)], &cam, &pose, &opts);
        let gt = rasterize_float(&[SplatLayer::world(&gt_set)], &cam, &pose, &opts);
        // keep away from the kinks of |residual|
        let mask: Vec<bool> = (0..cam.pixel_count())
            .map(|i| {
                base.weight[i] > 0.6
                    && gt.depth[i] > 0.0
                    && (base.depth[i] - gt.depth[i]).abs() > 1e-3
                    && (0..3).all(|c| (base.color[i][c] - gt.color[i][c]).abs() > 1e-3)
            })
            .collect();
        if mask.iter().filter(|m| **m).count() < 50 {
            continue;
        }
        let target = FitTarget::from_buffers(cam, pose, gt.color.clone(), gt.depth.clone(), mask);
        return GradScene { set, target };
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClassErrors {
    pub center: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub color: f64,
}

impl ClassErrors {
    pub fn max(&self) -> f64 {
        [self.center, self.rotation, self.scale, self.opacity, self.color].into_iter().fold(0.0, f64::max)
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let m = na.max(nb);
    if m < 1e-12 {
        0.0
    } else {
        d / m
    }
}

/// Relative error between analytic and central-difference gradients per
/// parameter class.
pub fn gradient_check(scene: &GradScene, cfg: &FitConfig) -> ClassErrors {
    let (_, grads) = loss_gradients(&scene.set, &scene.target, cfg).unwrap();
    let f = |s: &GaussianSet| loss(s, &scene.target, cfg).unwrap().total;
    let central = |k: usize, h: f64, perturb: &dyn Fn(&mut Gaussian2D, f64)| {
        let mut plus = scene.set.clone();
        perturb(&mut plus.gaussians[k], h);
        let mut minus = scene.set.clone();
        perturb(&mut minus.gaussians[k], -h);
        (f(&plus) - f(&minus)) / (2.0 * h)
    };
    let (mut ca, mut cf) = (Vec::new(), Vec::new());
    let (mut ra, mut rf) = (Vec::new(), Vec::new());
    let (mut sa, mut sf) = (Vec::new(), Vec::new());
    let (mut oa, mut of) = (Vec::new(), Vec::new());
    let (mut ka, mut kf) = (Vec::new(), Vec::new());
    let axes = [Vec3::X, Vec3::Y, Vec3::Z];
    for (k, g) in scene.set.iter().enumerate() {
        let ga: &SplatGrad = &grads[k];
        let size = 0.5 * (g.scale[0] + g.scale[1]);
        for (a, axis) in axes.iter().enumerate() {
            ca.push(ga.center.to_array()[a]);
            cf.push(central(k, 1e-4 * size, &|g, h| g.center += *axis * h));
            ra.push(ga.rotation.to_array()[a]);
            rf.push(central(k, 1e-4, &|g, h| g.rotation = UnitQuat::from_rotation_vector(*axis * h) * g.rotation));
        }
        for a in 0..2 {
            sa.push(ga.scale[a]);
            sf.push(central(k, 1e-4 * g.scale[a], &|g, h| g.scale[a] += h));
        }
        oa.push(ga.opacity);
        of.push(central(k, 1e-4, &|g, h| g.opacity += h));
        for c in 0..3 {
            ka.push(ga.sh_dc[c]);
            kf.push(central(k, 1e-4, &|g, h| g.sh_dc[c] += h));
            if scene.set.sh_degree >= 1 {
                for b in 0..3 {
                    ka.push(ga.sh_rest[b][c]);
                    kf.push(central(k, 1e-4, &|g, h| g.sh_rest[b][c] += h));
                }
            }
        }
    }
    ClassErrors {
        center: rel(&ca, &cf),
        rotation: rel(&ra, &rf),
        scale: rel(&sa, &sf),
        opacity: rel(&oa, &of),
        color: rel(&ka, &kf),
    }
}
