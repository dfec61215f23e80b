use std::collections::HashMap;

use super::{MeshError, TriangleMesh, TsdfGrid};

/// Cube faces as corner cycles, counter-clockwise about the outward normal.
/// Corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const FACES: [[usize; 4]; 6] = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];

/// Local edge id from its two corners: lower corner and axis.
fn edge_id(a: usize, b: usize) -> usize {
    let lower = a & b;
    let axis = (a ^ b).trailing_zeros() as usize;
    lower * 3 + axis
}

/// Oriented isoline segments (as local edge ids) on each face of one cube.
///
/// On a face with four crossings the face-center mean decides whether the
/// inside corners connect. Neighboring cubes see the same four values, so
/// shared faces always agree.
fn cube_links(values: &[f64; 8], iso: f64) -> [Option<usize>; 24] {
    let mut next = [None; 24];
    for face in FACES {
        let inside = face.map(|c| values[c] < iso);
        // crossings in cycle order: (edge id, entering the inside region)
        let mut crossings = Vec::with_capacity(4);
        for k in 0..4 {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            if inside[k] != inside[(k + 1) % 4] {
                crossings.push((edge_id(a, b), inside[(k + 1) % 4]));
            }
        }
        let n = crossings.len();
        if n == 0 {
            continue;
        }
        let center_inside = face.iter().map(|&c| values[c]).sum::<f64>() / 4.0 < iso;
        for (p, &(e, entering)) in crossings.iter().enumerate() {
            if entering {
                continue;
            }
            let partner = if n == 2 || center_inside { (p + 1) % n } else { (p + n - 1) % n };
            next[e] = Some(crossings[partner].0);
        }
    }
    next
}

/// Extract the `iso` level set. Cubes touching an unobserved node (zero
/// weight) are skipped. Vertices are shared between neighboring cubes, so
/// a closed surface inside the observed region comes out watertight, with
/// triangles facing the positive side.
pub fn marching_cubes(grid: &TsdfGrid, iso: f64) -> Result<TriangleMesh, MeshError> {
    let [nx, ny, nz] = grid.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(MeshError::EmptySurface);
    }
    let mut vertex_of: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut loop_buf = Vec::with_capacity(12);
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let node = |c: usize| grid.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let nodes: [usize; 8] = std::array::from_fn(node);
                if nodes.iter().any(|&n| grid.weights[n] <= 0.0) {
                    continue;
                }
                let values = nodes.map(|n| grid.values[n]);
                let below = values.iter().filter(|v| **v < iso).count();
                if below == 0 || below == 8 {
                    continue;
                }
                let next = cube_links(&values, iso);
                let mut seen = [false; 24];
                for start in 0..24 {
                    if next[start].is_none() || seen[start] {
                        continue;
                    }
                    loop_buf.clear();
                    let mut e = start;
                    while !seen[e] {
                        seen[e] = true;
                        let (lower, axis) = (e / 3, e % 3);
                        let upper = lower | (1 << axis);
                        let key = (nodes[lower], axis);
                        let idx = *vertex_of.entry(key).or_insert_with(|| {
                            let (v0, v1) = (values[lower], values[upper]);
                            let t = ((iso - v0) / (v1 - v0)).clamp(1e-9, 1.0 - 1e-9);
                            let p0 = grid.position(grid.unflatten(nodes[lower]));
                            let p1 = grid.position(grid.unflatten(nodes[upper]));
                            vertices.push(p0.lerp(p1, t));
                            (vertices.len() - 1) as u32
                        });
                        loop_buf.push(idx);
                        e = next[e].expect("isolines form closed loops");
                    }
                    for m in 1..loop_buf.len().saturating_sub(1) {
                        triangles.push([loop_buf[0], loop_buf[m + 1], loop_buf[m]]);
                    }
                }
            }
        }
    }
    let mesh = TriangleMesh::new(vertices, triangles).cleaned();
    if mesh.is_empty() {
        return Err(MeshError::EmptySurface);
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn sphere_grid(r: f64, voxel: f64) -> TsdfGrid {
        let n = ((2.0 * r + 6.0 * voxel) / voxel).ceil() as usize;
        let origin = Vec3::splat(-r - 3.0 * voxel);
        TsdfGrid::from_fn(origin, voxel, [n; 3], 4.0 * voxel, |p| p.norm() - r)
    }

    #[test]
    fn every_sign_pattern_closes() {
        // all 256 corner patterns, with both resolutions of ambiguous faces
        for pattern in 0..256u32 {
            for bias in [-0.3, 0.3] {
                let values: [f64; 8] =
                    std::array::from_fn(|c| if pattern >> c & 1 == 1 { -1.0 + bias * (c as f64 / 7.0) } else { 1.0 });
                let next = cube_links(&values, 0.0);
                let mut incoming = [0; 24];
                for e in next.iter().flatten() {
                    incoming[*e] += 1;
                }
                for e in 0..24 {
                    assert_eq!(next[e].is_some() as i32, incoming[e], "pattern {pattern:08b} edge {e}");
                }
            }
        }
    }

    #[test]
    fn sphere_is_accurate_and_closed() {
        let (r, voxel) = (0.1, 0.005);
        let mesh = marching_cubes(&sphere_grid(r, voxel), 0.0).unwrap();
        let mean = mesh.vertices.iter().map(|v| (v.norm() - r).abs()).sum::<f64>() / mesh.vertices.len() as f64;
        assert!(mean < 0.1 * voxel, "{mean}");
        assert!(mesh.is_watertight());
        let v = mesh.volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        assert!((v - exact).abs() < 0.02 * exact, "{v} {exact}");
    }

    #[test]
    fn all_positive_is_empty() {
        let g = TsdfGrid::from_fn(Vec3::ZERO, 0.1, [4, 4, 4], 0.3, |_| 0.2);
        assert_eq!(marching_cubes(&g, 0.0), Err(MeshError::EmptySurface));
    }

    #[test]
    fn half_space_is_planar() {
        let g = TsdfGrid::from_fn(Vec3::ZERO, 0.1, [6, 6, 6], 0.3, |p| p.z - 0.23);
        let mesh = marching_cubes(&g, 0.0).unwrap();
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corners(t);
            let n = (b - a).cross(c - a).normalize();
            assert!((n - Vec3::Z).norm() < 1e-9);
            assert!((a.z - 0.23).abs() < 1e-12);
        }
        assert!((mesh.area() - 0.25).abs() < 1e-9);
    }
}
