use crate::geometry::{RigidTransform, UnitQuat, Vec3};
use crate::mesh::{convex_hull, ConvexHull, HullPolygon, Plane};

/// One contact point. `normal` points from the first body to the second;
/// `separation` is negative when the bodies overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Vec3,
    pub normal: Vec3,
    pub separation: f64,
}

/// A convex hull placed in the world, with its polygons cached.
#[derive(Debug, Clone)]
pub struct PlacedHull {
    pub vertices: Vec<Vec3>,
    pub polygons: Vec<HullPolygon>,
    pub lo: Vec3,
    pub hi: Vec3,
    /// Orientation of the hull's own frame, used to break axis ties.
    pub frame: UnitQuat,
}

impl PlacedHull {
    pub fn new(hull: &ConvexHull, polygons: &[HullPolygon], pose: &RigidTransform) -> Self {
        let vertices: Vec<Vec3> = hull.vertices.iter().map(|v| pose.apply_point(*v)).collect();
        let polygons = polygons
            .iter()
            .map(|p| {
                let normal = pose.apply_vector(p.normal);
                let offset = p.vertices.iter().map(|&v| normal.dot(vertices[v as usize])).sum::<f64>() / p.vertices.len() as f64;
                HullPolygon { vertices: p.vertices.clone(), normal, offset }
            })
            .collect();
        let lo = vertices.iter().fold(Vec3::splat(f64::INFINITY), |a, v| a.min(*v));
        let hi = vertices.iter().fold(Vec3::splat(f64::NEG_INFINITY), |a, v| a.max(*v));
        Self { vertices, polygons, lo, hi, frame: pose.rotation }
    }

    pub fn from_hull(hull: &ConvexHull, pose: &RigidTransform) -> Self {
        Self::new(hull, &hull.polygons(), pose)
    }

    fn support(&self, d: Vec3) -> Vec3 {
        let mut best = self.vertices[0];
        let mut bd = best.dot(d);
        for v in &self.vertices[1..] {
            let x = v.dot(d);
            if x > bd {
                bd = x;
                best = *v;
            }
        }
        best
    }

    fn max_along(&self, d: Vec3) -> f64 {
        self.vertices.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn min_along(&self, d: Vec3) -> f64 {
        self.vertices.iter().map(|v| v.dot(d)).fold(f64::INFINITY, f64::min)
    }

    pub fn aabb_overlaps(&self, o: &PlacedHull, margin: f64) -> bool {
        let m = Vec3::splat(margin);
        let (alo, ahi) = (self.lo - m, self.hi + m);
        alo.x <= o.hi.x && alo.y <= o.hi.y && alo.z <= o.hi.z && o.lo.x <= ahi.x && o.lo.y <= ahi.y && o.lo.z <= ahi.z
    }

    fn scale(&self) -> f64 {
        (self.hi - self.lo).norm().max(1e-6)
    }
}

#[derive(Debug, Clone, Copy)]
struct Vertex {
    w: Vec3,
    a: Vec3,
    b: Vec3,
}

#[derive(Debug, Clone)]
pub(crate) struct GjkResult {
    pub overlap: bool,
    pub distance: f64,
    pub point_a: Vec3,
    pub point_b: Vec3,
    simplex: Vec<Vertex>,
}

/// Closest point to the origin on a simplex, with barycentric weights; the
/// simplex is reduced to the supporting vertices.
fn closest_on_simplex(s: &mut Vec<Vertex>) -> (Vec3, Vec<f64>) {
    match s.len() {
        1 => (s[0].w, vec![1.0]),
        2 => {
            let (a, b) = (s[0].w, s[1].w);
            let ab = b - a;
            let t = -a.dot(ab) / ab.norm_squared().max(f64::MIN_POSITIVE);
            if t <= 0.0 {
                s.truncate(1);
                (a, vec![1.0])
            } else if t >= 1.0 {
                s.remove(0);
                (b, vec![1.0])
            } else {
                (a + ab * t, vec![1.0 - t, t])
            }
        }
        3 => {
            let (p, l, keep) = closest_on_triangle(s[0].w, s[1].w, s[2].w);
            let kept: Vec<Vertex> = keep.iter().map(|&k| s[k]).collect();
            *s = kept;
            (p, l)
        }
        _ => {
            let w: Vec<Vec3> = s.iter().map(|v| v.w).collect();
            let faces = [[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 3, 1], [1, 2, 3, 0]];
            let mut best: Option<(f64, Vec3, Vec<f64>, Vec<usize>)> = None;
            let mut inside = true;
            for f in faces {
                let (a, b, c, d) = (w[f[0]], w[f[1]], w[f[2]], w[f[3]]);
                let n = (b - a).cross(c - a);
                let side_o = -n.dot(a);
                let side_d = n.dot(d - a);
                if side_o * side_d < 0.0 {
                    inside = false;
                    let (p, l, keep) = closest_on_triangle(a, b, c);
                    let d2 = p.norm_squared();
                    if best.as_ref().map_or(true, |(bd, ..)| d2 < *bd) {
                        best = Some((d2, p, l, keep.iter().map(|&k| f[k]).collect()));
                    }
                }
            }
            if inside {
                return (Vec3::ZERO, vec![0.25; 4]);
            }
            let (_, p, l, keep) = best.expect("outside some face");
            let kept: Vec<Vertex> = keep.iter().map(|&k| s[k]).collect();
            *s = kept;
            (p, l)
        }
    }
}

/// Closest point on triangle abc to the origin (after Ericson), the
/// barycentric weights of the supporting vertices and their indices.
fn closest_on_triangle(a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Vec<f64>, Vec<usize>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![1.0], vec![0]);
    }
    let bp = -b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![1.0], vec![1]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, vec![1.0 - v, v], vec![0, 1]);
    }
    let cp = -c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![1.0], vec![2]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, vec![1.0 - w, w], vec![0, 2]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, vec![1.0 - w, w], vec![1, 2]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, vec![1.0 - v - w, v, w], vec![0, 1, 2])
}

/// Distance between two convex hulls over the Minkowski difference A − B.
pub(crate) fn gjk(a: &PlacedHull, b: &PlacedHull) -> GjkResult {
    let scale = a.scale().max(b.scale());
    let sup = |d: Vec3| {
        let pa = a.support(d);
        let pb = b.support(-d);
        Vertex { w: pa - pb, a: pa, b: pb }
    };
    let start = a.vertices[0] - b.vertices[0];
    let first = sup(if start.norm_squared() > 0.0 { -start } else { Vec3::X });
    let mut simplex = vec![first];
    let mut v = first.w;
    let mut lambdas = vec![1.0];
    let tiny = (1e-12 * scale) * (1e-12 * scale);
    for _ in 0..64 {
        if v.norm_squared() <= tiny {
            break;
        }
        let w = sup(-v);
        // no further progress toward the origin
        if v.norm_squared() - v.dot(w.w) <= 1e-12 * v.norm_squared() {
            break;
        }
        if simplex.iter().any(|s| s.w == w.w) {
            break;
        }
        simplex.push(w);
        let (p, l) = closest_on_simplex(&mut simplex);
        lambdas = l;
        if simplex.len() == 4 {
            v = Vec3::ZERO;
            break;
        }
        v = p;
    }
    let overlap = v.norm_squared() <= tiny;
    let (mut pa, mut pb) = (Vec3::ZERO, Vec3::ZERO);
    if simplex.len() == lambdas.len() {
        for (s, l) in simplex.iter().zip(&lambdas) {
            pa += s.a * *l;
            pb += s.b * *l;
        }
    }
    GjkResult { overlap, distance: if overlap { 0.0 } else { v.norm() }, point_a: pa, point_b: pb, simplex }
}

/// Penetration direction (A to B) and depth by expanding a polytope inside
/// the Minkowski difference. `None` if the polytope fails to enclose the origin.
pub(crate) fn epa(a: &PlacedHull, b: &PlacedHull, seed: &[Vec3]) -> Option<(Vec3, f64)> {
    let sup = |d: Vec3| a.support(d) - b.support(-d);
    let mut pts: Vec<Vec3> = seed.to_vec();
    for d in [Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y, Vec3::Z, -Vec3::Z] {
        pts.push(sup(d));
    }
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                pts.push(sup(Vec3::new(sx, sy, sz)));
            }
        }
    }
    let tol = 1e-10 * a.scale().max(b.scale());
    let mut result = None;
    for _ in 0..48 {
        let hull = convex_hull(&pts).ok()?;
        let planes = hull.planes();
        if planes.iter().any(|p| p.offset < -tol) {
            return None;
        }
        let best = planes.iter().min_by(|p, q| p.offset.total_cmp(&q.offset))?;
        let w = sup(best.normal);
        let gain = best.normal.dot(w) - best.offset;
        result = Some((best.normal, best.offset));
        if gain <= tol {
            break;
        }
        pts = hull.vertices.clone();
        pts.push(w);
    }
    result
}

/// Separation of B from A along unit axis `m` (A to B): negative overlap.
fn separation_along(a: &PlacedHull, b: &PlacedHull, m: Vec3) -> f64 {
    b.min_along(m) - a.max_along(m)
}

/// Preference rank among tied axes, in the given frame: x before y before z,
/// positive first.
fn axis_rank(frame: UnitQuat, m: Vec3) -> usize {
    let m = frame.inverse().rotate(m);
    let c = [m.x, m.y, m.z];
    let mut k = 0;
    for i in 1..3 {
        if c[i].abs() > c[k].abs() + 1e-12 {
            k = i;
        }
    }
    2 * k + usize::from(c[k] < 0.0)
}

/// Best separating axis among the GJK/EPA direction and both hulls' face
/// normals; ties within tolerance go to [`axis_rank`] in the frame of `a`,
/// then to the earlier candidate.
fn best_axis(a: &PlacedHull, b: &PlacedHull, extra: Option<Vec3>) -> (Vec3, f64) {
    let tol = 1e-9 * a.scale().max(b.scale());
    let mut cands: Vec<Vec3> = a.polygons.iter().map(|p| p.normal).collect();
    cands.extend(b.polygons.iter().map(|p| -p.normal));
    cands.extend(extra);
    let mut best: Option<(Vec3, f64)> = None;
    for m in cands {
        let s = separation_along(a, b, m);
        best = match best {
            None => Some((m, s)),
            Some((bm, bs)) => {
                if s > bs + tol || (s > bs - tol && axis_rank(a.frame, m) < axis_rank(a.frame, bm)) {
                    Some((m, s))
                } else {
                    Some((bm, bs))
                }
            }
        };
    }
    best.expect("hulls have faces")
}

fn most_aligned(h: &PlacedHull, d: Vec3) -> usize {
    let mut best = 0;
    for (i, p) in h.polygons.iter().enumerate() {
        if p.normal.dot(d) > h.polygons[best].normal.dot(d) + 1e-12 {
            best = i;
        }
    }
    best
}

/// Sutherland–Hodgman clip of `poly` to the half-space `n·x ≤ d`.
fn clip(poly: &[Vec3], n: Vec3, d: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (dp, dq) = (n.dot(p) - d, n.dot(q) - d);
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            out.push(p.lerp(q, dp / (dp - dq)));
        }
    }
    out
}

fn face_contacts(reference: &PlacedHull, incident: &PlacedHull, dir: Vec3, margin: f64, flip: bool) -> Vec<Contact> {
    let rf = &reference.polygons[most_aligned(reference, dir)];
    let inf = &incident.polygons[most_aligned(incident, -rf.normal)];
    let mut poly: Vec<Vec3> = inf.vertices.iter().map(|&v| incident.vertices[v as usize]).collect();
    let rv: Vec<Vec3> = rf.vertices.iter().map(|&v| reference.vertices[v as usize]).collect();
    for k in 0..rv.len() {
        if poly.is_empty() {
            break;
        }
        let (e0, e1) = (rv[k], rv[(k + 1) % rv.len()]);
        let side = (e1 - e0).cross(rf.normal);
        let Some(side) = side.try_normalize() else {
            continue;
        };
        poly = clip(&poly, side, side.dot(e0));
    }
    let normal = if flip { -rf.normal } else { rf.normal };
    poly.into_iter()
        .filter_map(|p| {
            let sep = rf.normal.dot(p) - rf.offset;
            (sep <= margin).then(|| Contact { point: p - rf.normal * (0.5 * sep), normal, separation: sep })
        })
        .collect()
}

/// Contacts between two placed hulls, or none if they are farther apart
/// than `margin`. Normals point from `a` to `b`.
pub fn placed_hull_contact(a: &PlacedHull, b: &PlacedHull, margin: f64) -> Vec<Contact> {
    if !a.aabb_overlaps(b, margin) {
        return Vec::new();
    }
    let g = gjk(a, b);
    if !g.overlap && g.distance > margin {
        return Vec::new();
    }
    let extra = if g.overlap {
        let seed: Vec<Vec3> = g.simplex.iter().map(|v| v.w).collect();
        epa(a, b, &seed).map(|(n, _)| n)
    } else {
        (g.point_b - g.point_a).try_normalize()
    };
    let (m, s) = best_axis(a, b, extra);
    if s > margin {
        return Vec::new();
    }
    let align_a = a.polygons[most_aligned(a, m)].normal.dot(m);
    let align_b = b.polygons[most_aligned(b, -m)].normal.dot(-m);
    let mut contacts = if align_a >= align_b - 1e-9 {
        face_contacts(a, b, m, margin, false)
    } else {
        face_contacts(b, a, -m, margin, true)
    };
    if contacts.is_empty() {
        // edge-edge: a single point between the closest features
        let pb = b.support(-m);
        contacts.push(Contact { point: pb - m * (0.5 * s), normal: m, separation: s });
    }
    contacts
}

/// Contacts between two posed hulls (normals from `a` to `b`), or `None`
/// when farther apart than `margin`.
pub fn hull_contact(
    a: &ConvexHull,
    pose_a: &RigidTransform,
    b: &ConvexHull,
    pose_b: &RigidTransform,
    margin: f64,
) -> Option<Vec<Contact>> {
    let pa = PlacedHull::from_hull(a, pose_a);
    let pb = PlacedHull::from_hull(b, pose_b);
    let c = placed_hull_contact(&pa, &pb, margin);
    (!c.is_empty()).then_some(c)
}

/// Contacts of a hull's vertices with a plane (normal from plane to hull).
/// `footprint` optionally restricts contacts to points whose projection
/// lies within the given side planes.
pub fn plane_contacts(plane: &Plane, hull: &PlacedHull, margin: f64, footprint: &[Plane]) -> Vec<Contact> {
    hull.vertices
        .iter()
        .filter_map(|v| {
            let sep = plane.signed_distance(*v);
            let on_table = footprint.iter().all(|s| s.signed_distance(*v) <= 0.0);
            (sep <= margin && on_table).then(|| Contact { point: *v - plane.normal * (0.5 * sep), normal: plane.normal, separation: sep })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> ConvexHull {
        ConvexHull::cuboid(Vec3::ZERO, Vec3::splat(0.5))
    }

    #[test]
    fn far_cubes() {
        let t = RigidTransform::from_translation(Vec3::new(3.0, 0.0, 0.0));
        assert!(hull_contact(&cube(), &RigidTransform::IDENTITY, &cube(), &t, 0.0).is_none());
    }

    #[test]
    fn coincident_cubes_choose_x() {
        let c = hull_contact(&cube(), &RigidTransform::IDENTITY, &cube(), &RigidTransform::IDENTITY, 0.0).unwrap();
        assert!(!c.is_empty());
        for k in &c {
            assert_eq!(k.normal, Vec3::X);
            assert!((k.separation + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resting_face_contact() {
        let t = RigidTransform::from_translation(Vec3::new(0.1, 0.2, 0.999));
        let c = hull_contact(&cube(), &RigidTransform::IDENTITY, &cube(), &t, 0.0).unwrap();
        assert_eq!(c.len(), 4);
        for k in &c {
            assert!((k.normal - Vec3::Z).norm() < 1e-12);
            assert!((k.separation + 0.001).abs() < 1e-12);
        }
        // separated but within margin
        let t = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.002));
        let c = hull_contact(&cube(), &RigidTransform::IDENTITY, &cube(), &t, 0.005).unwrap();
        assert!(c.iter().all(|k| (k.separation - 0.002).abs() < 1e-12));
    }

    fn random_hull(rng: &mut ChaCha8Rng) -> ConvexHull {
        let pts: Vec<Vec3> =
            (0..12).map(|_| Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect();
        convex_hull(&pts).unwrap()
    }

    /// Separating-axis oracle: face normals of both hulls plus all
    /// triangle-edge cross products. Overlap iff no axis separates.
    fn sat_overlap(a: &PlacedHull, ha: &ConvexHull, b: &PlacedHull, hb: &ConvexHull) -> bool {
        let edges = |p: &PlacedHull, h: &ConvexHull| {
            let mut out = Vec::new();
            for f in &h.faces {
                for i in 0..3 {
                    out.push(p.vertices[f[(i + 1) % 3] as usize] - p.vertices[f[i] as usize]);
                }
            }
            out
        };
        let mut axes: Vec<Vec3> = a.polygons.iter().chain(&b.polygons).map(|p| p.normal).collect();
        let eb = edges(b, hb);
        for ea in edges(a, ha) {
            for e in &eb {
                if let Some(n) = ea.cross(*e).try_normalize() {
                    axes.push(n);
                }
            }
        }
        !axes.iter().any(|&n| separation_along(a, b, n) > 1e-12 || separation_along(b, a, n) > 1e-12)
    }

    #[test]
    fn overlap_agrees_with_sat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = 0;
        for _ in 0..300 {
            let (ha, hb) = (random_hull(&mut rng), random_hull(&mut rng));
            let pose = RigidTransform::new(
                UnitQuat::from_rotation_vector(Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))),
                Vec3::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)),
            );
            let a = PlacedHull::from_hull(&ha, &RigidTransform::IDENTITY);
            let b = PlacedHull::from_hull(&hb, &pose);
            let sat = sat_overlap(&a, &ha, &b, &hb);
            let g = gjk(&a, &b);
            assert_eq!(g.overlap || g.distance <= 1e-12, sat, "gjk {} sat {sat}", g.distance);
            hits += sat as usize;
        }
        assert!(hits > 30 && hits < 270, "{hits}");
    }

    #[test]
    fn gjk_distance_of_separated_cubes() {
        let t = RigidTransform::new(UnitQuat::from_axis_angle(Vec3::Z, 0.3), Vec3::new(2.0, 0.0, 0.0));
        let a = PlacedHull::from_hull(&cube(), &RigidTransform::IDENTITY);
        let b = PlacedHull::from_hull(&cube(), &t);
        let g = gjk(&a, &b);
        let closest_b = b.vertices.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        assert!((g.distance - (closest_b - 0.5)).abs() < 1e-9, "{}", g.distance);
    }
}
