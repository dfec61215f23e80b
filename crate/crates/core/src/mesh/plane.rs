use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

use super::MeshError;

/// The plane `normal·x = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vec3, offset: f64) -> Option<Self> {
        let n = normal.norm();
        (n > 0.0 && n.is_finite()).then(|| Self { normal: normal / n, offset: offset / n })
    }

    pub fn horizontal(height: f64) -> Self {
        Self { normal: Vec3::Z, offset: height }
    }

    pub fn through_points(a: Vec3, b: Vec3, c: Vec3) -> Option<Self> {
        let n = (b - a).cross(c - a).try_normalize()?;
        Some(Self { normal: n, offset: n.dot(a) })
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn project(&self, p: Vec3) -> Vec3 {
        p - self.normal * self.signed_distance(p)
    }

    /// Flip so the normal has a non-negative z component (ties broken on y, then x).
    pub fn canonical(self) -> Self {
        let n = self.normal;
        let flip = n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0)));
        if flip {
            Self { normal: -n, offset: -self.offset }
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Ascending indices of the points within the threshold of the refit plane.
    pub inliers: Vec<usize>,
}

/// Least-squares plane through `points`: centroid plus the direction of
/// least variance.
pub fn fit_plane_lsq(points: &[Vec3]) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let c = points.iter().fold(Vec3::ZERO, |a, p| a + *p) / points.len() as f64;
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = *p - c;
        let v = nalgebra::Vector3::new(d.x, d.y, d.z);
        cov += v * v.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // a line (two vanishing eigenvalues) has no unique plane
    if eig.eigenvalues[order[1]] <= 1e-12 * eig.eigenvalues[order[2]].max(f64::MIN_POSITIVE) {
        return None;
    }
    let e = eig.eigenvectors.column(order[0]);
    Plane::new(Vec3::new(e[0], e[1], e[2]), 0.0).map(|p| Plane { normal: p.normal, offset: p.normal.dot(c) })
}

/// RANSAC over sampled point triples, keeping the plane with the most
/// inliers (first found wins ties), then refit on its inliers.
pub fn ransac_plane(points: &[Vec3], iterations: usize, threshold: f64, seed: u64) -> Result<PlaneFit, MeshError> {
    if points.len() < 3 {
        return Err(MeshError::DegenerateInput("need at least 3 points"));
    }
    if !(threshold > 0.0) {
        return Err(MeshError::InvalidParameter("inlier threshold must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let count = |pl: &Plane| points.iter().filter(|p| pl.signed_distance(**p).abs() <= threshold).count();
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..iterations.max(1) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let c = rng.gen_range(0..n);
        if a == b || b == c || a == c {
            continue;
        }
        let Some(pl) = Plane::through_points(points[a], points[b], points[c]) else {
            continue;
        };
        let k = count(&pl);
        if best.map_or(true, |(bk, _)| k > bk) {
            best = Some((k, pl));
        }
    }
    let best = match best {
        Some((_, pl)) => pl,
        None => fit_plane_lsq(points).ok_or(MeshError::DegenerateInput("points are collinear"))?,
    };
    let inl: Vec<Vec3> = points.iter().copied().filter(|p| best.signed_distance(*p).abs() <= threshold).collect();
    let plane = fit_plane_lsq(&inl).unwrap_or(best).canonical();
    let inliers = (0..n).filter(|&i| plane.signed_distance(points[i]).abs() <= threshold).collect();
    Ok(PlaneFit { plane, inliers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec3> = (0..100).map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0)).collect();
        let fit = ransac_plane(&pts, 50, 1e-3, 0).unwrap();
        assert!((fit.plane.normal - Vec3::Z).norm() < 1e-9);
        assert!(fit.plane.offset.abs() < 1e-9);
        assert_eq!(fit.inliers.len(), 100);
    }

    #[test]
    fn outliers_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts: Vec<Vec3> = (0..700)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.5 + rng.gen_range(-0.002..0.002)))
            .collect();
        pts.extend((0..300).map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.5))));
        let fit = ransac_plane(&pts, 200, 0.005, 3).unwrap();
        assert!(fit.plane.normal.dot(Vec3::Z).acos() < 1f64.to_radians());
        assert!((fit.plane.offset - 0.5).abs() < 5e-3);
    }

    #[test]
    fn degenerate() {
        let two = [Vec3::ZERO, Vec3::X];
        assert!(matches!(ransac_plane(&two, 10, 0.01, 0), Err(MeshError::DegenerateInput(_))));
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::X * i as f64).collect();
        assert!(matches!(ransac_plane(&line, 10, 0.01, 0), Err(MeshError::DegenerateInput(_))));
    }
}
