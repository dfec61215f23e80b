use rayon::prelude::*;

use crate::geometry::{CameraIntrinsics, CameraPose, RgbdImage, RigidTransform, Vec3};

use super::gaussian::GaussianSet;

/// Accumulated blend weight below which a pixel's depth is reported invalid.
pub const DEPTH_VALID_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Render at this multiple of the target resolution, then box-filter down.
    pub supersample_factor: usize,
    /// Per-splat blend contributions below this are skipped.
    pub opacity_floor: f64,
    pub tile_size: usize,
    pub background: [u8; 3],
    /// Footprint cutoff in standard deviations.
    pub cutoff_sigma: f64,
    /// Splats whose centers are closer than this (camera z, meters) are culled.
    pub near: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            supersample_factor: 4,
            opacity_floor: 1.0 / 255.0,
            tile_size: 16,
            background: [0, 0, 0],
            cutoff_sigma: 3.0,
            near: 1e-3,
        }
    }
}

impl RenderOptions {
    pub fn background_f64(&self) -> [f64; 3] {
        self.background.map(|c| c as f64 / 255.0)
    }
}

/// One object's splats together with the pose that places them in the world.
#[derive(Debug, Clone, Copy)]
pub struct SplatLayer<'a> {
    pub set: &'a GaussianSet,
    pub pose: RigidTransform,
}

impl<'a> SplatLayer<'a> {
    pub fn new(set: &'a GaussianSet, pose: RigidTransform) -> Self {
        Self { set, pose }
    }

    pub fn world(set: &'a GaussianSet) -> Self {
        Self { set, pose: RigidTransform::IDENTITY }
    }
}

/// A splat prepared for one camera: screen-space affine footprint plus the
/// camera-frame quantities the backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct ProjectedSplat {
    /// Position in the concatenation of all layers.
    pub global_index: usize,
    pub depth: f64,
    pub mean: [f64; 2],
    pub jac_inv: [[f64; 2]; 2],
    /// Pixel range `[i0, i1) × [j0, j1)` that can receive a contribution.
    pub bbox: [usize; 4],
    pub opacity: f64,
    pub color: [f64; 3],
    /// Unit disk normal in the camera frame, flipped to face the camera.
    pub normal: Vec3,
    pub normal_sign: f64,
    /// Center in the camera frame.
    pub pc: Vec3,
    /// Scaled disk axes in the camera frame.
    pub axis_u: Vec3,
    pub axis_v: Vec3,
    /// Unit world-space view direction used for SH evaluation.
    pub view_dir: Vec3,
}

/// Result of evaluating one splat at one pixel center.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Footprint {
    pub alpha: f64,
    pub gauss: f64,
    pub ab: [f64; 2],
}

impl ProjectedSplat {
    #[inline]
    pub fn eval(&self, qx: f64, qy: f64, max_sigma: f64, opacity_floor: f64) -> Option<Footprint> {
        let dx = qx - self.mean[0];
        let dy = qy - self.mean[1];
        let a = self.jac_inv[0][0] * dx + self.jac_inv[0][1] * dy;
        let b = self.jac_inv[1][0] * dx + self.jac_inv[1][1] * dy;
        let sigma = 0.5 * (a * a + b * b);
        if sigma > max_sigma {
            return None;
        }
        let gauss = (-sigma).exp();
        let alpha = self.opacity * gauss;
        if alpha < opacity_floor {
            return None;
        }
        Some(Footprint { alpha, gauss, ab: [a, b] })
    }
}

/// Project every splat of every layer and sort front to back. Ties in depth
/// are broken by ascending global index.
pub(crate) fn project_splats(
    layers: &[SplatLayer<'_>],
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    opts: &RenderOptions,
) -> Vec<ProjectedSplat> {
    let cam_from_world = pose.camera_from_world();
    let eye = pose.center();
    let mut out = Vec::new();
    let mut global = 0usize;
    for layer in layers {
        for g in &layer.set.gaussians {
            let index = global;
            global += 1;
            let gw = g.transformed(&layer.pose);
            let pc = cam_from_world.apply_point(gw.center);
            if !(pc.z > opts.near) || !pc.is_finite() {
                continue;
            }
            let rot = (cam_from_world.rotation * gw.rotation).to_matrix();
            let axis_u = rot.col(0) * g.scale[0];
            let axis_v = rot.col(1) * g.scale[1];
            let n = rot.col(2);
            let normal_sign = if n.dot(pc) > 0.0 { -1.0 } else { 1.0 };
            let z = pc.z;
            let jp = [
                Vec3::new(cam.fx / z, 0.0, -cam.fx * pc.x / (z * z)),
                Vec3::new(0.0, cam.fy / z, -cam.fy * pc.y / (z * z)),
            ];
            let jac = [[jp[0].dot(axis_u), jp[0].dot(axis_v)], [jp[1].dot(axis_u), jp[1].dot(axis_v)]];
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !(det.abs() > 1e-9) || !det.is_finite() {
                continue;
            }
            let jac_inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
            let mean = [cam.fx * pc.x / z + cam.cx, cam.fy * pc.y / z + cam.cy];
            let ext_u = opts.cutoff_sigma * (jac[0][0] * jac[0][0] + jac[0][1] * jac[0][1]).sqrt();
            let ext_v = opts.cutoff_sigma * (jac[1][0] * jac[1][0] + jac[1][1] * jac[1][1]).sqrt();
            let Some(bbox) = pixel_range(mean, [ext_u, ext_v], cam) else {
                continue;
            };
            if g.opacity < opts.opacity_floor {
                continue;
            }
            let view_dir = (gw.center - eye).normalize();
            out.push(ProjectedSplat {
                global_index: index,
                depth: z,
                mean,
                jac_inv,
                bbox,
                opacity: g.opacity,
                color: layer.set.color_of(g, view_dir),
                normal: n * normal_sign,
                normal_sign,
                pc,
                axis_u,
                axis_v,
                view_dir,
            });
        }
    }
    out.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.global_index.cmp(&b.global_index)));
    out
}

fn pixel_range(mean: [f64; 2], ext: [f64; 2], cam: &CameraIntrinsics) -> Option<[usize; 4]> {
    // pixel i has its center at i + 0.5; one extra pixel of slack on each side
    let lo = |m: f64, e: f64| (m - e - 1.5).floor();
    let hi = |m: f64, e: f64| (m + e + 0.5).floor() + 1.0;
    let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64) as usize;
    let i0 = clamp(lo(mean[0], ext[0]), cam.width);
    let i1 = clamp(hi(mean[0], ext[0]), cam.width);
    let j0 = clamp(lo(mean[1], ext[1]), cam.height);
    let j1 = clamp(hi(mean[1], ext[1]), cam.height);
    (i0 < i1 && j0 < j1).then_some([i0, i1, j0, j1])
}

/// Per-tile lists of splat positions (into the sorted projected list), each
/// list in front-to-back order.
pub(crate) struct TileBins {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub bins: Vec<Vec<u32>>,
}

impl TileBins {
    pub fn build(splats: &[ProjectedSplat], width: usize, height: usize, tile_size: usize) -> Self {
        let ts = tile_size.max(1);
        let tiles_x = width.div_ceil(ts);
        let tiles_y = height.div_ceil(ts);
        let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
        for (k, sp) in splats.iter().enumerate() {
            let [i0, i1, j0, j1] = sp.bbox;
            for ty in j0 / ts..=(j1 - 1) / ts {
                for tx in i0 / ts..=(i1 - 1) / ts {
                    bins[ty * tiles_x + tx].push(k as u32);
                }
            }
        }
        Self { tile_size: ts, tiles_x, bins }
    }

    pub fn at(&self, i: usize, j: usize) -> &[u32] {
        &self.bins[(j / self.tile_size) * self.tiles_x + i / self.tile_size]
    }
}

/// Real-valued render output.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffer {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[f64; 3]>,
    /// Blended camera-frame depth, `0.0` where the accumulated weight is too low.
    pub depth: Vec<f64>,
    /// Accumulated blend weight `Σ wᵢ`.
    pub weight: Vec<f64>,
    /// Weight-normalized camera-frame normal, zero where nothing was hit.
    pub normal: Vec<Vec3>,
    pub transmittance: Vec<f64>,
}

impl RenderBuffer {
    fn background(width: usize, height: usize, bg: [f64; 3]) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            color: vec![bg; n],
            depth: vec![0.0; n],
            weight: vec![0.0; n],
            normal: vec![Vec3::ZERO; n],
            transmittance: vec![1.0; n],
        }
    }

    /// Quantize to an 8-bit image.
    pub fn to_rgbd(&self) -> RgbdImage {
        let rgb = self.color.iter().map(|c| c.map(quantize)).collect();
        RgbdImage::new(self.width, self.height, rgb, self.depth.clone()).expect("render buffer is consistent")
    }
}

pub(crate) fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[derive(Debug, Clone, Copy)]
struct PixelOut {
    color: [f64; 3],
    depth: f64,
    weight: f64,
    normal: Vec3,
    transmittance: f64,
}

#[inline]
fn composite_pixel<'s>(
    qx: f64,
    qy: f64,
    splats: impl Iterator<Item = &'s ProjectedSplat>,
    bg: [f64; 3],
    max_sigma: f64,
    floor: f64,
) -> PixelOut {
    let mut t = 1.0;
    let mut color = [0.0; 3];
    let mut weight = 0.0;
    let mut depth_sum = 0.0;
    let mut normal_sum = Vec3::ZERO;
    for sp in splats {
        let Some(fp) = sp.eval(qx, qy, max_sigma, floor) else {
            continue;
        };
        let w = t * fp.alpha;
        for ch in 0..3 {
            color[ch] += w * sp.color[ch];
        }
        weight += w;
        depth_sum += w * sp.depth;
        normal_sum += sp.normal * w;
        t *= 1.0 - fp.alpha;
    }
    for ch in 0..3 {
        color[ch] += t * bg[ch];
    }
    PixelOut {
        color,
        depth: if weight >= DEPTH_VALID_WEIGHT { depth_sum / weight } else { 0.0 },
        weight,
        normal: if weight > 0.0 { normal_sum / weight } else { Vec3::ZERO },
        transmittance: t,
    }
}

fn max_sigma(opts: &RenderOptions) -> f64 {
    0.5 * opts.cutoff_sigma * opts.cutoff_sigma
}

/// Tile-binned, parallel front-to-back compositing.
///
/// Output is bit-identical for any tile size and thread count: every pixel
/// visits the same splats in the same global order.
pub fn rasterize_float(
    layers: &[SplatLayer<'_>],
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    opts: &RenderOptions,
) -> RenderBuffer {
    let bg = opts.background_f64();
    let mut buf = RenderBuffer::background(cam.width, cam.height, bg);
    let splats = project_splats(layers, cam, pose, opts);
    if splats.is_empty() {
        return buf;
    }
    let bins = TileBins::build(&splats, cam.width, cam.height, opts.tile_size);
    let (ts, tiles_x) = (bins.tile_size, bins.tiles_x);
    let ms = max_sigma(opts);
    let floor = opts.opacity_floor;
    let tile_pixels: Vec<Vec<(usize, PixelOut)>> = bins
        .bins
        .par_iter()
        .enumerate()
        .map(|(tile, list)| {
            if list.is_empty() {
                return Vec::new();
            }
            let (tx, ty) = (tile % tiles_x, tile / tiles_x);
            let mut out = Vec::with_capacity(ts * ts);
            for j in ty * ts..((ty + 1) * ts).min(cam.height) {
                for i in tx * ts..((tx + 1) * ts).min(cam.width) {
                    let px = composite_pixel(
                        i as f64 + 0.5,
                        j as f64 + 0.5,
                        list.iter().map(|&k| &splats[k as usize]),
                        bg,
                        ms,
                        floor,
                    );
                    out.push((j * cam.width + i, px));
                }
            }
            out
        })
        .collect();
    for (idx, px) in tile_pixels.into_iter().flatten() {
        buf.color[idx] = px.color;
        buf.depth[idx] = px.depth;
        buf.weight[idx] = px.weight;
        buf.normal[idx] = px.normal;
        buf.transmittance[idx] = px.transmittance;
    }
    buf
}

/// Reference renderer: for every pixel, walk the full depth-sorted splat list.
/// Single-threaded and slow; kept as the oracle for the tiled path.
pub fn rasterize_reference(
    layers: &[SplatLayer<'_>],
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    opts: &RenderOptions,
) -> RenderBuffer {
    let bg = opts.background_f64();
    let mut buf = RenderBuffer::background(cam.width, cam.height, bg);
    let splats = project_splats(layers, cam, pose, opts);
    let ms = max_sigma(opts);
    for j in 0..cam.height {
        for i in 0..cam.width {
            let px = composite_pixel(i as f64 + 0.5, j as f64 + 0.5, splats.iter(), bg, ms, opts.opacity_floor);
            let idx = j * cam.width + i;
            buf.color[idx] = px.color;
            buf.depth[idx] = px.depth;
            buf.weight[idx] = px.weight;
            buf.normal[idx] = px.normal;
            buf.transmittance[idx] = px.transmittance;
        }
    }
    buf
}

/// Render an 8-bit RGB-D image at the camera's native resolution.
/// An empty scene yields the background image.
pub fn rasterize(
    layers: &[SplatLayer<'_>],
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    opts: &RenderOptions,
) -> RgbdImage {
    rasterize_float(layers, cam, pose, opts).to_rgbd()
}

/// Render at `supersample_factor`× the target size and box-filter down.
///
/// Colors are averaged before quantization. Depth is the mean of the valid
/// samples in each block, invalid when none are valid.
pub fn render_downsampled_float(
    layers: &[SplatLayer<'_>],
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    target_w: usize,
    target_h: usize,
    opts: &RenderOptions,
) -> Result<RenderBuffer, crate::geometry::GeomError> {
    let target = cam.resized(target_w.max(1), target_h.max(1))?;
    let f = opts.supersample_factor.max(1);
    let hi = rasterize_float(layers, &target.scaled(f), pose, opts);
    if f == 1 {
        return Ok(hi);
    }
    let (w, h) = (target.width, target.height);
    let mut out = RenderBuffer::background(w, h, opts.background_f64());
    let inv = 1.0 / (f * f) as f64;
    out.color
        .par_iter_mut()
        .zip(out.depth.par_iter_mut())
        .zip(out.weight.par_iter_mut().zip(out.normal.par_iter_mut()))
        .zip(out.transmittance.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (((color, depth), (weight, normal)), trans))| {
            let (i, j) = (idx % w, idx / w);
            let mut c = [0.0; 3];
            let (mut wsum, mut tsum) = (0.0, 0.0);
            let mut nsum = Vec3::ZERO;
            let (mut dsum, mut dcount) = (0.0, 0usize);
            for sj in j * f..(j + 1) * f {
                for si in i * f..(i + 1) * f {
                    let k = sj * hi.width + si;
                    for ch in 0..3 {
                        c[ch] += hi.color[k][ch];
                    }
                    wsum += hi.weight[k];
                    tsum += hi.transmittance[k];
                    nsum += hi.normal[k];
                    if hi.depth[k] > 0.0 {
                        dsum += hi.depth[k];
                        dcount += 1;
                    }
                }
            }
            *color = c.map(|v| v * inv);
            *weight = wsum * inv;
            *trans = tsum * inv;
            *normal = nsum * inv;
            *depth = if dcount > 0 { dsum / dcount as f64 } else { 0.0 };
        });
    Ok(out)
}

pub fn render_downsampled(
    layers: &[SplatLayer<'_>],
    cam: &CameraIntrinsics,
    pose: &CameraPose,
    target_w: usize,
    target_h: usize,
    opts: &RenderOptions,
) -> Result<RgbdImage, crate::geometry::GeomError> {
    Ok(render_downsampled_float(layers, cam, pose, target_w, target_h, opts)?.to_rgbd())
}
