use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Frame, UnitQuat, Vec3};
use crate::splat::GaussianSet;

use super::loss::{loss, loss_gradients, FitTarget, LossBreakdown, SplatGrad};
use super::{FitConfig, FitError};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-15;
const OPACITY_CLAMP: f64 = 1e-6;
const MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub set: GaussianSet,
    /// Mean batch loss per iteration.
    pub history: Vec<LossBreakdown>,
    /// Mean loss over all frames before and after training (before pruning).
    pub initial: LossBreakdown,
    pub final_loss: LossBreakdown,
    pub pruned: usize,
}

/// Flattened per-splat parameter vector: center(3), rotation tangent(3),
/// ln scale(2), logit opacity(1), dc(3), rest(9).
const P: usize = 21;

fn flatten(g: &SplatGrad, s: &crate::splat::Gaussian2D) -> [f64; P] {
    let mut out = [0.0; P];
    out[0..3].copy_from_slice(&[g.center.x, g.center.y, g.center.z]);
    out[3..6].copy_from_slice(&[g.rotation.x, g.rotation.y, g.rotation.z]);
    out[6] = g.scale[0] * s.scale[0];
    out[7] = g.scale[1] * s.scale[1];
    out[8] = g.opacity * s.opacity * (1.0 - s.opacity);
    out[9..12].copy_from_slice(&g.sh_dc);
    for b in 0..3 {
        out[12 + 3 * b..15 + 3 * b].copy_from_slice(&g.sh_rest[b]);
    }
    out
}

fn logit(a: f64) -> f64 {
    let a = a.clamp(OPACITY_CLAMP, 1.0 - OPACITY_CLAMP);
    (a / (1.0 - a)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mean_loss(set: &GaussianSet, targets: &[FitTarget], cfg: &FitConfig) -> Result<LossBreakdown, FitError> {
    let mut acc = LossBreakdown::default();
    for t in targets {
        let l = loss(set, t, cfg)?;
        acc.l_rec += l.l_rec;
        acc.l_n += l.l_n;
        acc.l_depth += l.l_depth;
        acc.total += l.total;
    }
    let n = targets.len() as f64;
    Ok(LossBreakdown { l_rec: acc.l_rec / n, l_n: acc.l_n / n, l_depth: acc.l_depth / n, total: acc.total / n })
}

/// Fit `init` to the masked frames with Adam, then prune.
///
/// Frames are visited in a seeded shuffled order, `cfg.batch` per step.
/// If training ends with a higher mean loss than it started with, the
/// initial set is kept.
pub fn optimize(frames: &[Frame], init: &GaussianSet, cfg: &FitConfig) -> Result<FitResult, FitError> {
    if frames.is_empty() {
        return Err(FitError::NoFrames);
    }
    cfg.validate()?;
    let targets: Vec<FitTarget> = frames.iter().map(FitTarget::from_frame).collect();
    if targets.iter().any(|t| t.masked_count() == 0) {
        return Err(FitError::EmptyMask);
    }
    let initial = mean_loss(init, &targets, cfg)?;

    let mut set = init.clone();
    let n = set.len();
    let mut m = vec![[0.0; P]; n];
    let mut v = vec![[0.0; P]; n];
    let lr = {
        let s = &cfg.steps;
        let mut lr = [s.color; P];
        lr[0..3].fill(s.center);
        lr[3..6].fill(s.rotation);
        lr[6..8].fill(s.scale);
        lr[8] = s.opacity;
        lr
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let mut batch_grad = vec![[0.0; P]; n];
        let mut batch_loss = LossBreakdown::default();
        let bsz = cfg.batch.min(targets.len());
        for _ in 0..bsz {
            if order.is_empty() {
                order = (0..targets.len()).collect();
                order.shuffle(&mut rng);
            }
            let f = order.pop().expect("refilled");
            let (l, grads) = loss_gradients(&set, &targets[f], cfg)?;
            batch_loss.l_rec += l.l_rec / bsz as f64;
            batch_loss.l_n += l.l_n / bsz as f64;
            batch_loss.l_depth += l.l_depth / bsz as f64;
            batch_loss.total += l.total / bsz as f64;
            for (k, g) in grads.iter().enumerate() {
                let flat = flatten(g, &set.gaussians[k]);
                for p in 0..P {
                    batch_grad[k][p] += flat[p] / bsz as f64;
                }
            }
        }
        history.push(batch_loss);

        let t = (it + 1) as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let degree1 = set.sh_degree >= 1;
        for (k, g) in set.gaussians.iter_mut().enumerate() {
            let mut step = [0.0; P];
            for p in 0..P {
                let gr = batch_grad[k][p];
                m[k][p] = BETA1 * m[k][p] + (1.0 - BETA1) * gr;
                v[k][p] = BETA2 * v[k][p] + (1.0 - BETA2) * gr * gr;
                let mh = m[k][p] / c1;
                let vh = v[k][p] / c2;
                step[p] = lr[p] * mh / (vh.sqrt() + ADAM_EPS);
            }
            g.center = g.center - Vec3::new(step[0], step[1], step[2]);
            let delta = -Vec3::new(step[3], step[4], step[5]);
            g.rotation = UnitQuat::from_rotation_vector(delta) * g.rotation;
            for a in 0..2 {
                g.scale[a] = (g.scale[a].ln() - step[6 + a]).exp().max(MIN_SCALE);
            }
            g.opacity = sigmoid(logit(g.opacity) - step[8]);
            for c in 0..3 {
                g.sh_dc[c] -= step[9 + c];
            }
            if degree1 {
                for b in 0..3 {
                    for c in 0..3 {
                        g.sh_rest[b][c] -= step[12 + 3 * b + c];
                    }
                }
            }
        }
    }

    let mut final_loss = mean_loss(&set, &targets, cfg)?;
    if final_loss.total > initial.total {
        set = init.clone();
        final_loss = initial;
    }
    let before = set.len();
    let set = prune(&set, cfg);
    Ok(FitResult { pruned: before - set.len(), set, history, initial, final_loss })
}

/// Drop splats that are nearly transparent or nearly black.
pub fn prune(set: &GaussianSet, cfg: &FitConfig) -> GaussianSet {
    let keep: Vec<usize> = set
        .iter()
        .enumerate()
        .filter(|(_, g)| g.opacity >= cfg.prune_opacity_floor && g.luminance() >= cfg.prune_color_floor)
        .map(|(i, _)| i)
        .collect();
    set.select(&keep)
}
