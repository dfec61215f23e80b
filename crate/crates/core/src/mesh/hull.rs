use std::collections::HashMap;

use crate::geometry::{RigidTransform, Vec3};

use super::{MeshError, Plane, TriangleMesh};

/// Closed convex polyhedron with outward-facing triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Copy)]
struct Face {
    v: [u32; 3],
    normal: Vec3,
    offset: f64,
}

impl Face {
    fn new(points: &[Vec3], v: [u32; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i as usize]);
        let normal = (b - a).cross(c - a).normalize();
        Self { v, normal, offset: normal.dot(a) }
    }

    fn distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Incremental convex hull. Points within a tolerance relative to the
/// point cloud extent of an existing face are treated as on it, so
/// coplanar and interior points never become hull vertices.
pub fn convex_hull(points: &[Vec3]) -> Result<ConvexHull, MeshError> {
    if points.len() < 4 {
        return Err(MeshError::DegenerateInput("need at least 4 points"));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(MeshError::DegenerateInput("non-finite point"));
    }
    let lo = points.iter().fold(points[0], |a, p| a.min(*p));
    let hi = points.iter().fold(points[0], |a, p| a.max(*p));
    let scale = (hi - lo).norm();
    let eps = 1e-12 * scale.max(1.0) * 64.0;

    // initial tetrahedron from extreme points
    let i0 = (0..points.len()).min_by(|&a, &b| points[a].x.total_cmp(&points[b].x)).expect("non-empty");
    let i1 = (0..points.len())
        .max_by(|&a, &b| (points[a] - points[i0]).norm_squared().total_cmp(&(points[b] - points[i0]).norm_squared()))
        .expect("non-empty");
    let line = points[i1] - points[i0];
    let i2 = (0..points.len())
        .max_by(|&a, &b| {
            line.cross(points[a] - points[i0]).norm_squared().total_cmp(&line.cross(points[b] - points[i0]).norm_squared())
        })
        .expect("non-empty");
    let tri_n = line.cross(points[i2] - points[i0]);
    if tri_n.norm() <= eps * line.norm().max(f64::MIN_POSITIVE) {
        return Err(MeshError::DegenerateInput("points are collinear"));
    }
    let i3 = (0..points.len())
        .max_by(|&a, &b| tri_n.dot(points[a] - points[i0]).abs().total_cmp(&tri_n.dot(points[b] - points[i0]).abs()))
        .expect("non-empty");
    if tri_n.normalize().dot(points[i3] - points[i0]).abs() <= eps {
        return Err(MeshError::DegenerateInput("points are coplanar"));
    }
    let (i0, i1, i2, i3) = (i0 as u32, i1 as u32, i2 as u32, i3 as u32);
    let mut faces: Vec<Option<Face>> = Vec::new();
    let base = if tri_n.dot(points[i3 as usize] - points[i0 as usize]) > 0.0 { [i0, i2, i1] } else { [i0, i1, i2] };
    faces.push(Some(Face::new(points, base)));
    for (a, b) in [(base[0], base[1]), (base[1], base[2]), (base[2], base[0])] {
        faces.push(Some(Face::new(points, [b, a, i3])));
    }

    let mut edge_face: HashMap<(u32, u32), usize> = HashMap::new();
    let link = |edge_face: &mut HashMap<(u32, u32), usize>, f: &Face, idx: usize| {
        for k in 0..3 {
            edge_face.insert((f.v[k], f.v[(k + 1) % 3]), idx);
        }
    };
    for (idx, f) in faces.iter().enumerate() {
        link(&mut edge_face, f.as_ref().expect("fresh"), idx);
    }

    let mut visible = Vec::new();
    let mut stack = Vec::new();
    let mut mark: Vec<bool> = Vec::new();
    for (pi, &p) in points.iter().enumerate() {
        let pi = pi as u32;
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let seed = faces
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().map(|f| (i, f.distance(p))))
            .filter(|(_, d)| *d > eps)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((seed, _)) = seed else {
            continue;
        };
        // flood the connected visible region
        mark.clear();
        mark.resize(faces.len(), false);
        visible.clear();
        stack.clear();
        stack.push(seed);
        mark[seed] = true;
        while let Some(fi) = stack.pop() {
            visible.push(fi);
            let f = faces[fi].expect("live face");
            for k in 0..3 {
                let twin = edge_face[&(f.v[(k + 1) % 3], f.v[k])];
                if !mark[twin] && faces[twin].expect("live face").distance(p) > eps {
                    mark[twin] = true;
                    stack.push(twin);
                }
            }
        }
        let mut horizon = Vec::new();
        for &fi in &visible {
            let f = faces[fi].expect("live face");
            for k in 0..3 {
                let (a, b) = (f.v[k], f.v[(k + 1) % 3]);
                if !mark[edge_face[&(b, a)]] {
                    horizon.push((a, b));
                }
            }
        }
        for &fi in &visible {
            let f = faces[fi].take().expect("live face");
            for k in 0..3 {
                let e = (f.v[k], f.v[(k + 1) % 3]);
                if edge_face.get(&e) == Some(&fi) {
                    edge_face.remove(&e);
                }
            }
        }
        for (a, b) in horizon {
            let f = Face::new(points, [a, b, pi]);
            faces.push(Some(f));
            link(&mut edge_face, &f, faces.len() - 1);
        }
    }

    let mut remap: HashMap<u32, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut out_faces = Vec::new();
    for f in faces.into_iter().flatten() {
        out_faces.push(f.v.map(|i| {
            *remap.entry(i).or_insert_with(|| {
                vertices.push(points[i as usize]);
                (vertices.len() - 1) as u32
            })
        }));
    }
    Ok(ConvexHull { vertices, faces: out_faces })
}

/// A planar hull face: vertex indices counter-clockwise about the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPolygon {
    pub vertices: Vec<u32>,
    pub normal: Vec3,
    pub offset: f64,
}

impl ConvexHull {
    /// Faces with coplanar neighboring triangles merged into polygons.
    pub fn polygons(&self) -> Vec<HullPolygon> {
        let planes = self.planes();
        let scale = self.vertices.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-3);
        let mut edge_face: HashMap<(u32, u32), usize> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                edge_face.insert((f[k], f[(k + 1) % 3]), fi);
            }
        }
        let coplanar = |a: usize, b: usize| {
            planes[a].normal.dot(planes[b].normal) > 1.0 - 1e-10
                && self.faces[b].iter().all(|&v| planes[a].signed_distance(self.vertices[v as usize]).abs() < 1e-10 * scale)
        };
        let mut group = vec![usize::MAX; self.faces.len()];
        let mut out = Vec::new();
        for start in 0..self.faces.len() {
            if group[start] != usize::MAX {
                continue;
            }
            let gid = out.len();
            let mut members = vec![start];
            group[start] = gid;
            let mut k = 0;
            while k < members.len() {
                let f = self.faces[members[k]];
                for e in 0..3 {
                    let nb = edge_face[&(f[(e + 1) % 3], f[e])];
                    if group[nb] == usize::MAX && coplanar(start, nb) {
                        group[nb] = gid;
                        members.push(nb);
                    }
                }
                k += 1;
            }
            // boundary edges of the group chain into one loop
            let mut next: HashMap<u32, u32> = HashMap::new();
            let mut first = None;
            for &fi in &members {
                let f = self.faces[fi];
                for e in 0..3 {
                    let (a, b) = (f[e], f[(e + 1) % 3]);
                    if group[edge_face[&(b, a)]] != gid {
                        next.insert(a, b);
                        first = Some(first.map_or(a, |m: u32| m.min(a)));
                    }
                }
            }
            let first = first.expect("group has a boundary");
            let mut vertices = vec![first];
            let mut cur = next[&first];
            while cur != first && vertices.len() <= next.len() {
                vertices.push(cur);
                cur = next[&cur];
            }
            let normal = members.iter().fold(Vec3::ZERO, |acc, &fi| acc + planes[fi].normal).normalize();
            let offset = vertices.iter().map(|&v| normal.dot(self.vertices[v as usize])).sum::<f64>() / vertices.len() as f64;
            out.push(HullPolygon { vertices, normal, offset });
        }
        out
    }

    pub fn planes(&self) -> Vec<Plane> {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i as usize]);
                let n = (b - a).cross(c - a).normalize();
                Plane { normal: n, offset: n.dot(a) }
            })
            .collect()
    }

    /// Largest signed distance of `p` to any face plane: non-positive inside.
    pub fn signed_distance_bound(&self, p: Vec3) -> f64 {
        self.planes().iter().map(|pl| pl.signed_distance(p)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Vec3, tolerance: f64) -> bool {
        self.signed_distance_bound(p) <= tolerance
    }

    /// Vertex farthest along `dir` (lowest index on ties).
    pub fn support(&self, dir: Vec3) -> Vec3 {
        let mut best = self.vertices[0];
        let mut best_d = best.dot(dir);
        for v in &self.vertices[1..] {
            let d = v.dot(dir);
            if d > best_d {
                best = *v;
                best_d = d;
            }
        }
        best
    }

    pub fn volume(&self) -> f64 {
        self.to_mesh().volume()
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().fold(Vec3::ZERO, |a, v| a + *v) / self.vertices.len() as f64
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self { vertices: self.vertices.iter().map(|v| t.apply_point(*v)).collect(), faces: self.faces.clone() }
    }

    pub fn to_mesh(&self) -> TriangleMesh {
        TriangleMesh::new(self.vertices.clone(), self.faces.clone())
    }

    /// Axis-aligned box hull.
    pub fn cuboid(center: Vec3, half: Vec3) -> Self {
        let pts: Vec<Vec3> = (0..8)
            .map(|c| {
                center
                    + Vec3::new(
                        if c & 1 == 1 { half.x } else { -half.x },
                        if c & 2 == 2 { half.y } else { -half.y },
                        if c & 4 == 4 { half.z } else { -half.z },
                    )
            })
            .collect();
        convex_hull(&pts).expect("box has volume")
    }
}
