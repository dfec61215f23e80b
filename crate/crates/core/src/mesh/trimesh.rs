use std::collections::HashMap;

use crate::geometry::{RigidTransform, Vec3};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles, colors: None }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Indices in range and colors (when present) matching the vertex count.
    pub fn is_valid(&self) -> bool {
        let n = self.vertices.len() as u32;
        self.triangles.iter().all(|t| t.iter().all(|&i| i < n))
            && self.colors.as_ref().map_or(true, |c| c.len() == self.vertices.len())
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Every directed edge is matched by exactly one opposite edge.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a, b)).or_default() += 1;
            }
        }
        !self.triangles.is_empty()
            && edges.iter().all(|(&(a, b), &c)| c == 1 && edges.get(&(b, a)) == Some(&1))
    }

    /// Signed volume enclosed by a closed, outward-oriented mesh.
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.min(*v), hi.max(*v))))
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| t.apply_point(*v)).collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Drop zero-area triangles and unreferenced vertices, preserving order.
    pub fn cleaned(&self) -> Self {
        let triangles: Vec<[u32; 3]> = (0..self.triangles.len())
            .filter(|&t| {
                let tri = self.triangles[t];
                tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] && self.triangle_area(t) > 0.0
            })
            .map(|t| self.triangles[t])
            .collect();
        let mut used = vec![false; self.vertices.len()];
        for t in &triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        for (i, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            remap[i] = vertices.len() as u32;
            vertices.push(self.vertices[i]);
            if let (Some(out), Some(src)) = (colors.as_mut(), self.colors.as_ref()) {
                out.push(src[i]);
            }
        }
        let triangles = triangles.into_iter().map(|t| t.map(|i| remap[i as usize])).collect();
        Self { vertices, triangles, colors }
    }
}
