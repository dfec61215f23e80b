use super::{Plane, TriangleMesh};

/// Push the mesh out of the half-space below `plane`.
///
/// Vertices more than `epsilon` below are projected onto the plane,
/// triangles with all three vertices that far below are dropped, and the
/// degenerate triangles left behind are removed. Applying it twice changes
/// nothing further.
pub fn clip_below_plane(mesh: &TriangleMesh, plane: &Plane, epsilon: f64) -> TriangleMesh {
    let below: Vec<bool> = mesh.vertices.iter().map(|v| plane.signed_distance(*v) < -epsilon).collect();
    let triangles = mesh.triangles.iter().copied().filter(|t| !t.iter().all(|&i| below[i as usize])).collect();
    let vertices = mesh
        .vertices
        .iter()
        .zip(&below)
        .map(|(v, b)| if *b { plane.project(*v) } else { *v })
        .collect();
    TriangleMesh { vertices, triangles, colors: mesh.colors.clone() }.cleaned()
}
