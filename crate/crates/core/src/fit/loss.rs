use rayon::prelude::*;

use crate::geometry::{unproject_camera_frame, CameraIntrinsics, CameraPose, Frame, Mask, RgbdImage, Vec3};
use crate::splat::{
    project_splats, Footprint, GaussianSet, ProjectedSplat, RenderOptions, SplatLayer, TileBins, DEPTH_VALID_WEIGHT,
    SH_C0, SH_C1,
};

use super::{FitConfig, FitError};

/// Rows per work chunk are derived from this fixed chunk count, so the
/// reduction order never depends on the thread count.
const CHUNKS: usize = 16;

/// Relative depth jump above which a ground-truth normal is not estimated.
const NORMAL_DEPTH_JUMP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l_rec: f64,
    pub l_n: f64,
    pub l_depth: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn new(l_rec: f64, l_n: f64, l_depth: f64, cfg: &FitConfig) -> Self {
        Self { l_rec, l_n, l_depth, total: l_rec + cfg.lambda_normal * l_n + cfg.lambda_depth * l_depth }
    }
}

/// Gradient of the total loss with respect to one splat's parameters.
///
/// `rotation` is the gradient with respect to a left-multiplied small-angle
/// update `r ← exp(δ)·r`, with δ in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplatGrad {
    pub center: Vec3,
    pub rotation: Vec3,
    pub scale: [f64; 2],
    pub opacity: f64,
    pub sh_dc: [f64; 3],
    pub sh_rest: [[f64; 3]; 3],
}

impl SplatGrad {
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for v in [self.center, self.rotation] {
            m = m.max(v.abs().x).max(v.abs().y).max(v.abs().z);
        }
        for v in self.scale.iter().chain([self.opacity].iter()).chain(self.sh_dc.iter()) {
            m = m.max(v.abs());
        }
        for row in &self.sh_rest {
            for v in row {
                m = m.max(v.abs());
            }
        }
        m
    }
}

/// Ground truth for one view: masked colors in `[0, 1]`, depth and
/// camera-frame normals estimated from depth.
#[derive(Debug, Clone)]
pub struct FitTarget {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub rgb: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
    pub normal: Vec<Option<Vec3>>,
}

impl FitTarget {
    pub fn from_frame(frame: &Frame) -> Self {
        let rgb = frame.image.rgb().iter().map(|c| c.map(|v| v as f64 / 255.0)).collect();
        Self::from_buffers(frame.intrinsics, frame.pose, rgb, frame.image.depth().to_vec(), frame.mask.data().to_vec())
    }

    /// Build from real-valued buffers (e.g. a render). Depth outside the mask is ignored.
    pub fn from_buffers(
        intrinsics: CameraIntrinsics,
        pose: CameraPose,
        rgb: Vec<[f64; 3]>,
        mut depth: Vec<f64>,
        mask: Vec<bool>,
    ) -> Self {
        for (d, m) in depth.iter_mut().zip(&mask) {
            if !*m || !(*d > 0.0) {
                *d = 0.0;
            }
        }
        let normal = depth_normals(&intrinsics, &depth);
        Self { intrinsics, pose, rgb, depth, mask, normal }
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Camera-frame normals from central differences of back-projected depth,
/// oriented toward the camera. `None` at borders, holes and depth jumps.
pub fn depth_normals(cam: &CameraIntrinsics, depth: &[f64]) -> Vec<Option<Vec3>> {
    let (w, h) = (cam.width, cam.height);
    let point = |i: usize, j: usize| {
        let d = depth[j * w + i];
        unproject_camera_frame(i as f64 + 0.5, j as f64 + 0.5, d, cam).ok()
    };
    (0..w * h)
        .map(|idx| {
            let (i, j) = (idx % w, idx / w);
            if i == 0 || j == 0 || i + 1 >= w || j + 1 >= h {
                return None;
            }
            let d = depth[idx];
            if !(d > 0.0) {
                return None;
            }
            let neighbors = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)];
            if neighbors.iter().any(|&(a, b)| (depth[b * w + a] - d).abs() > NORMAL_DEPTH_JUMP * d) {
                return None;
            }
            let dx = point(i + 1, j)? - point(i - 1, j)?;
            let dy = point(i, j + 1)? - point(i, j - 1)?;
            let n = dx.cross(dy).try_normalize()?;
            let p = point(i, j)?;
            Some(if n.dot(p) > 0.0 { -n } else { n })
        })
        .collect()
}

/// Restrict an observation to its mask: outside pixels take `background`
/// and invalid depth.
pub fn mask_frame(frame: &RgbdImage, mask: &Mask, background: [u8; 3]) -> Result<RgbdImage, FitError> {
    if frame.dims() != mask.dims() {
        return Err(FitError::DimensionMismatch { image: frame.dims(), mask: mask.dims() });
    }
    let mut out = frame.clone();
    for j in 0..frame.height() {
        for i in 0..frame.width() {
            if !mask.get(i, j) {
                out.set(i, j, background, 0.0);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Contribution {
    k: u32,
    fp: Footprint,
    t_before: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct PixelState {
    color: [f64; 3],
    weight: f64,
    depth: f64,
    normal: Vec3,
}

#[derive(Debug, Clone, Copy, Default)]
struct PixelTerms {
    rec: f64,
    depth: Option<f64>,
    normal: Option<f64>,
}

/// Front-to-back compositing of one pixel, recording every contribution.
fn composite(
    splats: &[ProjectedSplat],
    list: &[u32],
    q: (f64, f64),
    opts: &RenderOptions,
    bg: [f64; 3],
    out: &mut Vec<Contribution>,
) -> PixelState {
    out.clear();
    let max_sigma = 0.5 * opts.cutoff_sigma * opts.cutoff_sigma;
    let mut t = 1.0;
    let mut color = [0.0; 3];
    let mut weight = 0.0;
    let mut depth_sum = 0.0;
    let mut normal_sum = Vec3::ZERO;
    for &k in list {
        let sp = &splats[k as usize];
        let Some(fp) = sp.eval(q.0, q.1, max_sigma, opts.opacity_floor) else {
            continue;
        };
        let w = t * fp.alpha;
        for ch in 0..3 {
            color[ch] += w * sp.color[ch];
        }
        weight += w;
        depth_sum += w * sp.depth;
        normal_sum += sp.normal * w;
        out.push(Contribution { k, fp, t_before: t });
        t *= 1.0 - fp.alpha;
    }
    for ch in 0..3 {
        color[ch] += t * bg[ch];
    }
    PixelState {
        color,
        weight,
        depth: if weight >= DEPTH_VALID_WEIGHT { depth_sum / weight } else { 0.0 },
        normal: if weight > 0.0 { normal_sum / weight } else { Vec3::ZERO },
    }
}

fn pixel_terms(px: &PixelState, target: &FitTarget, idx: usize) -> PixelTerms {
    let gt = target.rgb[idx];
    let rec = (0..3).map(|c| (px.color[c] - gt[c]).abs()).sum::<f64>();
    let both_depth = target.depth[idx] > 0.0 && px.depth > 0.0;
    PixelTerms {
        rec,
        depth: both_depth.then(|| (px.depth - target.depth[idx]).abs()),
        normal: if both_depth { target.normal[idx].map(|n| 1.0 - px.normal.dot(n)) } else { None },
    }
}

struct Prepared {
    splats: Vec<ProjectedSplat>,
    bins: TileBins,
    bg: [f64; 3],
}

fn prepare(set: &GaussianSet, target: &FitTarget, cfg: &FitConfig) -> Prepared {
    let layers = [SplatLayer::world(set)];
    let splats = project_splats(&layers, &target.intrinsics, &target.pose, &cfg.render);
    let bins = TileBins::build(&splats, target.intrinsics.width, target.intrinsics.height, cfg.render.tile_size);
    Prepared { splats, bins, bg: cfg.render.background_f64() }
}

fn row_chunks(height: usize) -> Vec<(usize, usize)> {
    let per = height.div_ceil(CHUNKS).max(1);
    (0..height).step_by(per).map(|j0| (j0, (j0 + per).min(height))).collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    rec: f64,
    depth: f64,
    normal: f64,
    n_rec: usize,
    n_depth: usize,
    n_normal: usize,
}

impl Sums {
    fn add(mut self, o: Sums) -> Sums {
        self.rec += o.rec;
        self.depth += o.depth;
        self.normal += o.normal;
        self.n_rec += o.n_rec;
        self.n_depth += o.n_depth;
        self.n_normal += o.n_normal;
        self
    }
}

fn forward(prep: &Prepared, target: &FitTarget, cfg: &FitConfig) -> (Sums, Vec<PixelState>) {
    let w = target.intrinsics.width;
    let chunks = row_chunks(target.intrinsics.height);
    let parts: Vec<(Sums, Vec<PixelState>)> = chunks
        .par_iter()
        .map(|&(j0, j1)| {
            let mut sums = Sums::default();
            let mut states = Vec::with_capacity((j1 - j0) * w);
            let mut scratch = Vec::new();
            for j in j0..j1 {
                for i in 0..w {
                    let idx = j * w + i;
                    let px = composite(
                        &prep.splats,
                        prep.bins.at(i, j),
                        (i as f64 + 0.5, j as f64 + 0.5),
                        &cfg.render,
                        prep.bg,
                        &mut scratch,
                    );
                    if target.mask[idx] {
                        let t = pixel_terms(&px, target, idx);
                        sums.rec += t.rec;
                        sums.n_rec += 1;
                        if let Some(d) = t.depth {
                            sums.depth += d;
                            sums.n_depth += 1;
                        }
                        if let Some(n) = t.normal {
                            sums.normal += n;
                            sums.n_normal += 1;
                        }
                    }
                    states.push(px);
                }
            }
            (sums, states)
        })
        .collect();
    let mut total = Sums::default();
    let mut states = Vec::with_capacity(w * target.intrinsics.height);
    for (s, st) in parts {
        total = total.add(s);
        states.extend(st);
    }
    (total, states)
}

fn breakdown(s: &Sums, cfg: &FitConfig) -> Result<LossBreakdown, FitError> {
    if s.n_rec == 0 {
        return Err(FitError::EmptyMask);
    }
    let mean = |v: f64, n: usize| if n > 0 { v / n as f64 } else { 0.0 };
    Ok(LossBreakdown::new(s.rec / (3 * s.n_rec) as f64, mean(s.normal, s.n_normal), mean(s.depth, s.n_depth), cfg))
}

/// Evaluate `L = L_rec + λ_n·L_n + λ_depth·L_depth` for one view.
///
/// `L_rec` is the mean absolute color error over masked pixels and
/// channels. `L_depth` is the mean absolute depth error over masked pixels
/// where both ground truth and render have valid depth. `L_n` averages
/// `1 − n·N` over those pixels that also have a ground-truth normal, with
/// `n` the weight-normalized rendered disk normal.
pub fn loss(set: &GaussianSet, target: &FitTarget, cfg: &FitConfig) -> Result<LossBreakdown, FitError> {
    let prep = prepare(set, target, cfg);
    let (sums, _) = forward(&prep, target, cfg);
    breakdown(&sums, cfg)
}

/// Camera-frame gradient accumulators for one projected splat.
#[derive(Debug, Clone, Copy, Default)]
struct CamGrad {
    pc: Vec3,
    axis_u: Vec3,
    axis_v: Vec3,
    normal: Vec3,
    alpha: f64,
    color: [f64; 3],
}

impl CamGrad {
    fn add(&mut self, o: &CamGrad) {
        self.pc += o.pc;
        self.axis_u += o.axis_u;
        self.axis_v += o.axis_v;
        self.normal += o.normal;
        self.alpha += o.alpha;
        for c in 0..3 {
            self.color[c] += o.color[c];
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss and its analytic gradient with respect to every splat.
pub fn loss_gradients(
    set: &GaussianSet,
    target: &FitTarget,
    cfg: &FitConfig,
) -> Result<(LossBreakdown, Vec<SplatGrad>), FitError> {
    let prep = prepare(set, target, cfg);
    let (sums, states) = forward(&prep, target, cfg);
    let loss = breakdown(&sums, cfg)?;

    let cam = &target.intrinsics;
    let w = cam.width;
    let g_rec = 1.0 / (3 * sums.n_rec) as f64;
    let g_depth = if sums.n_depth > 0 { cfg.lambda_depth / sums.n_depth as f64 } else { 0.0 };
    let g_normal = if sums.n_normal > 0 { cfg.lambda_normal / sums.n_normal as f64 } else { 0.0 };
    let n_splats = prep.splats.len();

    let chunk_grads: Vec<Vec<CamGrad>> = row_chunks(cam.height)
        .par_iter()
        .map(|&(j0, j1)| {
            let mut acc = vec![CamGrad::default(); n_splats];
            let mut contribs = Vec::new();
            for j in j0..j1 {
                for i in 0..w {
                    let idx = j * w + i;
                    if !target.mask[idx] {
                        continue;
                    }
                    let px = composite(
                        &prep.splats,
                        prep.bins.at(i, j),
                        (i as f64 + 0.5, j as f64 + 0.5),
                        &cfg.render,
                        prep.bg,
                        &mut contribs,
                    );
                    debug_assert_eq!(px.color, states[idx].color);
                    let terms = pixel_terms(&px, target, idx);
                    let gt = target.rgb[idx];
                    let g_color: [f64; 3] = std::array::from_fn(|c| g_rec * sign(px.color[c] - gt[c]));
                    let g_d = if terms.depth.is_some() { g_depth * sign(px.depth - target.depth[idx]) } else { 0.0 };
                    let g_n = match (terms.normal, target.normal[idx]) {
                        (Some(_), Some(n)) => -n * g_normal,
                        _ => Vec3::ZERO,
                    };
                    accumulate_pixel(&prep, &contribs, &px, (g_color, g_d, g_n), cam, &mut acc);
                }
            }
            acc
        })
        .collect();

    let mut total = vec![CamGrad::default(); n_splats];
    for part in &chunk_grads {
        for (t, g) in total.iter_mut().zip(part) {
            t.add(g);
        }
    }

    let mut grads = vec![SplatGrad::default(); set.len()];
    let cam_from_world = target.pose.camera_from_world();
    let rot_t = cam_from_world.rotation.inverse();
    for (sp, cg) in prep.splats.iter().zip(&total) {
        let g = &set.gaussians[sp.global_index];
        let out = &mut grads[sp.global_index];
        let world_rot = g.rotation.to_matrix();
        let (tu, tv, n) = (world_rot.col(0), world_rot.col(1), world_rot.col(2));

        let g_tu = rot_t.rotate(cg.axis_u) * g.scale[0];
        let g_tv = rot_t.rotate(cg.axis_v) * g.scale[1];
        let g_n = rot_t.rotate(cg.normal) * sp.normal_sign;
        out.rotation = tu.cross(g_tu) + tv.cross(g_tv) + n.cross(g_n);
        out.scale = [cg.axis_u.dot(sp.axis_u) / g.scale[0], cg.axis_v.dot(sp.axis_v) / g.scale[1]];
        out.opacity = cg.alpha;
        out.center = rot_t.rotate(cg.pc);
        for c in 0..3 {
            out.sh_dc[c] = cg.color[c] * SH_C0;
        }
        if set.sh_degree >= 1 {
            let d = sp.view_dir;
            let basis = crate::splat::sh1_basis(d);
            let mut g_dir = Vec3::ZERO;
            for c in 0..3 {
                for b in 0..3 {
                    out.sh_rest[b][c] = cg.color[c] * basis[b];
                }
                g_dir += Vec3::new(-g.sh_rest[2][c], -g.sh_rest[0][c], g.sh_rest[1][c]) * (SH_C1 * cg.color[c]);
            }
            let dist = sp.pc.norm();
            out.center += (g_dir - d * d.dot(g_dir)) / dist;
        }
    }
    Ok((loss, grads))
}

/// Backpropagate one pixel's upstream gradients through the compositing
/// chain into the camera-frame accumulators.
fn accumulate_pixel(
    prep: &Prepared,
    contribs: &[Contribution],
    px: &PixelState,
    upstream: ([f64; 3], f64, Vec3),
    cam: &CameraIntrinsics,
    acc: &mut [CamGrad],
) {
    let (g_color, g_d, g_n) = upstream;
    if contribs.is_empty() {
        return;
    }
    let inv_w = if px.weight > 0.0 { 1.0 / px.weight } else { 0.0 };
    let depth_valid = px.depth > 0.0;
    // gradient flowing into each blend weight w_k
    let e = |sp: &ProjectedSplat| {
        let mut v = (0..3).map(|c| g_color[c] * sp.color[c]).sum::<f64>();
        if depth_valid {
            v += g_d * (sp.depth - px.depth) * inv_w;
            v += g_n.dot(sp.normal - px.normal) * inv_w;
        }
        v
    };
    let mut behind = (0..3).map(|c| g_color[c] * prep.bg[c]).sum::<f64>();
    for c in contribs.iter().rev() {
        let sp = &prep.splats[c.k as usize];
        let a = c.fp.alpha;
        let w_k = c.t_before * a;
        let e_k = e(sp);
        let g_alpha_eff = c.t_before * (e_k - behind);
        behind = e_k * a + (1.0 - a) * behind;

        let g = &mut acc[c.k as usize];
        for ch in 0..3 {
            g.color[ch] += g_color[ch] * w_k;
        }
        if depth_valid {
            g.pc.z += g_d * w_k * inv_w;
            g.normal += g_n * (w_k * inv_w);
        }
        g.alpha += g_alpha_eff * c.fp.gauss;

        // a = opacity·exp(−σ), σ = ½|J⁻¹(q − m)|²
        let g_sigma = -g_alpha_eff * sp.opacity * c.fp.gauss;
        let [ua, ub] = c.fp.ab;
        let ji = &sp.jac_inv;
        let h0 = ji[0][0] * ua + ji[1][0] * ub;
        let h1 = ji[0][1] * ua + ji[1][1] * ub;
        let pc = sp.pc;
        let z = pc.z;
        let jp0 = Vec3::new(cam.fx / z, 0.0, -cam.fx * pc.x / (z * z));
        let jp1 = Vec3::new(0.0, cam.fy / z, -cam.fy * pc.y / (z * z));
        let jt_h = jp0 * h0 + jp1 * h1;
        let x = sp.axis_u * ua + sp.axis_v * ub;
        let z2 = z * z;
        let z3 = z2 * z;
        let grad_phi = Vec3::new(
            -h0 * cam.fx * x.z / z2,
            -h1 * cam.fy * x.z / z2,
            h0 * cam.fx * (-x.x / z2 + 2.0 * pc.x * x.z / z3) + h1 * cam.fy * (-x.y / z2 + 2.0 * pc.y * x.z / z3),
        );
        g.pc += (-jt_h - grad_phi) * g_sigma;
        g.axis_u += jt_h * (-ua * g_sigma);
        g.axis_v += jt_h * (-ub * g_sigma);
    }
}
