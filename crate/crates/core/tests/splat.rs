use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatworld::geometry::{CameraIntrinsics, CameraPose, UnitQuat, Vec3};
use splatworld::splat::{rasterize, rasterize_float, rasterize_reference, render_downsampled, Gaussian2D, GaussianSet, RenderOptions, SplatLayer};

fn random_scene(seed: u64, n: usize) -> GaussianSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = Vec3::new(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
            let q = UnitQuat::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0));
            let rgb = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            Gaussian2D::with_color(c, q, [rng.gen_range(0.01..0.05), rng.gen_range(0.01..0.05)], rng.gen_range(0.3..1.0), rgb)
        })
        .collect()
}

fn view() -> CameraPose {
    CameraPose::look_at(Vec3::new(0.5, 0.2, 0.3), Vec3::ZERO, Vec3::Z)
}

#[test]
fn tiled_matches_brute_force_reference() {
    let set = random_scene(3, 50);
    let cam = CameraIntrinsics::centered(55.0, 64, 48).unwrap();
    let opts = RenderOptions { supersample_factor: 1, ..RenderOptions::default() };
    let layers = [SplatLayer::world(&set)];
    let fast = rasterize_float(&layers, &cam, &view(), &opts);
    let slow = rasterize_reference(&layers, &cam, &view(), &opts);
    assert_eq!(fast.color, slow.color);
    assert_eq!(fast.depth, slow.depth);
    assert_eq!(fast.weight, slow.weight);
}

#[test]
fn downsampled_matches_box_filtered_high_res() {
    let set = random_scene(5, 120);
    let cam = CameraIntrinsics::centered(55.0, 128, 128).unwrap();
    let layers = [SplatLayer::world(&set)];
    let low = render_downsampled(&layers, &cam, &view(), 128, 128, &RenderOptions { supersample_factor: 4, ..RenderOptions::default() }).unwrap();
    let hi_cam = CameraIntrinsics::centered(220.0, 512, 512).unwrap();
    let hi = rasterize(&layers, &hi_cam, &view(), &RenderOptions { supersample_factor: 1, ..RenderOptions::default() });
    let mut worst = 0i32;
    for j in 0..128 {
        for i in 0..128 {
            let mut sum = [0u32; 3];
            for sj in 4 * j..4 * j + 4 {
                for si in 4 * i..4 * i + 4 {
                    let p = hi.rgb()[sj * 512 + si];
                    for c in 0..3 {
                        sum[c] += p[c] as u32;
                    }
                }
            }
            let got = low.rgb()[j * 128 + i];
            for c in 0..3 {
                let oracle = (sum[c] as f64 / 16.0).round() as i32;
                worst = worst.max((oracle - got[c] as i32).abs());
            }
        }
    }
    assert!(worst <= 1, "max channel difference {worst}");
}

#[test]
fn constant_color_survives_downsampling() {
    let rgb = [0.2, 0.6, 0.8];
    let wall: GaussianSet = (0..21)
        .flat_map(|i| (0..21).map(move |j| (i, j)))
        .map(|(i, j)| Gaussian2D::with_color(Vec3::new(-0.5 + 0.05 * i as f64, -0.5 + 0.05 * j as f64, 1.0), UnitQuat::IDENTITY, [0.05, 0.05], 1.0, rgb))
        .collect();
    let cam = CameraIntrinsics::centered(40.0, 16, 16).unwrap();
    let opts = RenderOptions { supersample_factor: 3, background: [0, 0, 0], ..RenderOptions::default() };
    let img = render_downsampled(&[SplatLayer::world(&wall)], &cam, &CameraPose::default(), 16, 16, &opts).unwrap();
    let expect = rgb.map(|c| (c * 255.0).round() as u8);
    assert!(img.rgb().iter().all(|p| *p == expect), "{:?}", &img.rgb()[..4]);
}
