use std::collections::HashMap;

use crate::geometry::Vec3;

use super::gaussian::GaussianSet;

/// Uniform hash grid for fixed-radius neighbor queries.
pub(crate) struct PointGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(*p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    fn key(p: Vec3, cell: f64) -> [i64; 3] {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    /// Calls `f` for every stored point within `radius` of `q` (radius ≤ cell size).
    pub fn for_each_within(&self, q: Vec3, radius: f64, mut f: impl FnMut(usize) -> bool) {
        let k = Self::key(q, self.cell);
        let r2 = radius * radius;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in list {
                            if (self.points[i] - q).norm_squared() <= r2 && !f(i) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Indices (ascending) of points that have at least `min_neighbors` other
/// points within `radius`.
pub fn radius_outlier_inliers(points: &[Vec3], radius: f64, min_neighbors: usize) -> Vec<usize> {
    assert!(radius > 0.0, "radius must be positive");
    if min_neighbors == 0 {
        return (0..points.len()).collect();
    }
    let grid = PointGrid::new(points, radius);
    (0..points.len())
        .filter(|&i| {
            let mut count = 0usize;
            grid.for_each_within(points[i], radius, |j| {
                if j != i {
                    count += 1;
                }
                count < min_neighbors
            });
            count >= min_neighbors
        })
        .collect()
}

/// Radius outlier removal over splat centers.
pub fn filter_radius_outliers(set: &GaussianSet, radius: f64, min_neighbors: usize) -> GaussianSet {
    set.select(&radius_outlier_inliers(&set.centers(), radius, min_neighbors))
}

/// Drop scene splats that duplicate an object splat: any scene splat with an
/// object-splat center within `radius` is removed.
pub fn dedup_background(scene: &GaussianSet, objects: &[GaussianSet], radius: f64) -> GaussianSet {
    assert!(radius > 0.0, "radius must be positive");
    let object_centers: Vec<Vec3> = objects.iter().flat_map(|s| s.centers()).collect();
    if object_centers.is_empty() {
        return scene.clone();
    }
    let grid = PointGrid::new(&object_centers, radius);
    let keep: Vec<usize> = (0..scene.len())
        .filter(|&i| {
            let mut hit = false;
            grid.for_each_within(scene.gaussians[i].center, radius, |_| {
                hit = true;
                false
            });
            !hit
        })
        .collect();
    scene.select(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitQuat;
    use crate::splat::Gaussian2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set_of(points: &[Vec3]) -> GaussianSet {
        points
            .iter()
            .map(|p| Gaussian2D::with_color(*p, UnitQuat::IDENTITY, [0.01, 0.01], 1.0, [0.5; 3]))
            .collect()
    }

    #[test]
    fn dense_cluster_kept_isolated_removed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts: Vec<Vec3> =
            (0..100).map(|_| Vec3::new(rng.gen_range(0.0..0.01), rng.gen_range(0.0..0.01), rng.gen_range(0.0..0.01))).collect();
        let kept = radius_outlier_inliers(&pts, 0.02, 5);
        assert_eq!(kept.len(), 100);
        pts.push(Vec3::new(0.2, 0.0, 0.0));
        let kept = radius_outlier_inliers(&pts, 0.02, 5);
        assert_eq!(kept, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> =
            (0..1000).map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        for (radius, k) in [(0.1, 1), (0.15, 3), (0.25, 8)] {
            let brute: Vec<usize> = (0..pts.len())
                .filter(|&i| (0..pts.len()).filter(|&j| j != i && pts[i].distance(pts[j]) <= radius).count() >= k)
                .collect();
            assert_eq!(radius_outlier_inliers(&pts, radius, k), brute);
        }
    }

    #[test]
    fn dedup_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..300).map(|_| Vec3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0)).collect();
        let scene = set_of(&pts);
        assert_eq!(dedup_background(&scene, &[], 0.01), scene);
        assert!(dedup_background(&scene, &[scene.clone()], 0.01).is_empty());

        let obj: Vec<Vec3> = (0..50).map(|_| Vec3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0)).collect();
        let out = dedup_background(&scene, &[set_of(&obj)], 0.05);
        let brute: Vec<Vec3> = pts.iter().copied().filter(|p| obj.iter().all(|o| o.distance(*p) > 0.05)).collect();
        assert_eq!(out.centers(), brute);
    }
}
