use serde::{Deserialize, Serialize};

use crate::geometry::{Mat3, RigidTransform, Vec3};
use crate::mesh::{ConvexHull, HullPolygon, Plane};
use crate::splat::GaussianSet;

use super::body::{ObjectAsset, PoseDelta};
use super::collision::{placed_hull_contact, plane_contacts, Contact, PlacedHull};
use super::DynamicsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub iterations: usize,
    pub baumgarte: f64,
    /// Penetration tolerated before positional correction kicks in (m).
    pub slop: f64,
    /// Contacts are generated up to this gap (m), plus the distance the
    /// pair can close in one step.
    pub margin: f64,
    /// Approach speed below which restitution is ignored (m/s).
    pub bounce_threshold: f64,
    pub sleep_linear: f64,
    pub sleep_angular: f64,
    pub sleep_steps: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 8,
            baumgarte: 0.2,
            slop: 5e-4,
            margin: 5e-3,
            bounce_threshold: 0.05,
            sleep_linear: 5e-3,
            sleep_angular: 0.05,
            sleep_steps: 30,
        }
    }
}

/// A hull moved by position control, e.g. the gripper palm. It pushes
/// dynamic bodies but is not pushed back.
#[derive(Debug, Clone)]
pub struct KinematicHull {
    pub hull: ConvexHull,
    pub polygons: Vec<HullPolygon>,
    pub from: RigidTransform,
    pub to: RigidTransform,
    /// Object index the hull never collides with (the held object).
    pub ignore: Option<usize>,
}

impl KinematicHull {
    pub fn new(hull: ConvexHull, from: RigidTransform, to: RigidTransform) -> Self {
        let polygons = hull.polygons();
        Self { hull, polygons, from, to, ignore: None }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub objects: Vec<ObjectAsset>,
    pub table: Plane,
    /// Table contacts only act on points above this hull's footprint.
    pub workspace: ConvexHull,
    pub background_splats: GaussianSet,
    pub gravity: Vec3,
    pub dt: f64,
    pub table_friction: f64,
    pub solver: SolverConfig,
}

impl Default for WorldState {
    fn default() -> Self {
        Self {
            objects: Vec::new(),
            table: Plane::horizontal(0.0),
            workspace: ConvexHull::cuboid(Vec3::new(0.0, 0.0, 0.5), Vec3::new(1.0, 1.0, 0.5)),
            background_splats: GaussianSet::default(),
            gravity: Vec3::new(0.0, 0.0, -9.81),
            dt: 1.0 / 240.0,
            table_friction: 0.5,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SettleReport {
    pub steps: usize,
    pub converged: bool,
}

/// One side of a contact row.
#[derive(Debug, Clone, Copy)]
enum Side {
    Static,
    Dynamic(usize),
    Moving { v: Vec3, w: Vec3, pivot: Vec3 },
}

struct Row {
    a: Side,
    b: Side,
    n: Vec3,
    p: Vec3,
    target: f64,
    mass_n: f64,
    mu: f64,
    lambda: f64,
    tangent: Vec3,
}

struct Bodies {
    v: Vec<Vec3>,
    w: Vec<Vec3>,
    com: Vec<Vec3>,
    inv_m: Vec<f64>,
    inv_i: Vec<Mat3>,
}

impl Bodies {
    fn velocity_at(&self, s: Side, p: Vec3) -> Vec3 {
        match s {
            Side::Static => Vec3::ZERO,
            Side::Dynamic(i) => self.v[i] + self.w[i].cross(p - self.com[i]),
            Side::Moving { v, w, pivot } => v + w.cross(p - pivot),
        }
    }

    fn inv_mass_along(&self, s: Side, p: Vec3, d: Vec3) -> f64 {
        match s {
            Side::Dynamic(i) => {
                let r = p - self.com[i];
                let rd = r.cross(d);
                self.inv_m[i] + self.inv_i[i].mul_vec(rd).cross(r).dot(d)
            }
            _ => 0.0,
        }
    }

    /// Change of `n_i · v(p_i)` on side `s` per unit impulse `n_j` at `p_j`,
    /// signed so that the sum over both sides couples two contact rows.
    fn response(&self, s: Side, p_i: Vec3, n_i: Vec3, p_j: Vec3, n_j: Vec3) -> f64 {
        match s {
            Side::Dynamic(k) => {
                let dv = n_j * self.inv_m[k];
                let dw = self.inv_i[k].mul_vec((p_j - self.com[k]).cross(n_j));
                (dv + dw.cross(p_i - self.com[k])).dot(n_i)
            }
            _ => 0.0,
        }
    }

    fn apply(&mut self, s: Side, p: Vec3, j: Vec3) {
        if let Side::Dynamic(i) = s {
            let r = p - self.com[i];
            self.v[i] += j * self.inv_m[i];
            self.w[i] += self.inv_i[i].mul_vec(r.cross(j));
        }
    }
}

/// Contact rows sharing both bodies, with their coupling matrix.
struct Manifold {
    start: usize,
    len: usize,
    /// `k[i * len + j]`: change of row i's normal velocity per unit impulse on row j.
    k: Vec<f64>,
}

const BLOCK_SWEEPS: usize = 64;

impl Manifold {
    fn new(rows: &[Row], start: usize, bodies: &Bodies) -> Self {
        let len = rows.len();
        let mut k = vec![0.0; len * len];
        for (i, ri) in rows.iter().enumerate() {
            for (j, rj) in rows.iter().enumerate() {
                k[i * len + j] = bodies.response(ri.a, ri.p, ri.n, rj.p, rj.n) + bodies.response(ri.b, ri.p, ri.n, rj.p, rj.n);
            }
        }
        Self { start, len, k }
    }

    fn solve_normals(&self, rows: &mut [Row], bodies: &mut Bodies) {
        let rows = &mut rows[self.start..self.start + self.len];
        let n = self.len;
        let vn0: Vec<f64> = rows.iter().map(|r| (bodies.velocity_at(r.b, r.p) - bodies.velocity_at(r.a, r.p)).dot(r.n)).collect();
        let mut delta = vec![0.0; n];
        let scale = rows.iter().map(|r| r.lambda.abs() + (r.target - 0.0).abs() * r.mass_n).fold(f64::MIN_POSITIVE, f64::max);
        for _ in 0..BLOCK_SWEEPS {
            let mut change: f64 = 0.0;
            for i in 0..n {
                let kii = self.k[i * n + i];
                if kii <= 0.0 {
                    continue;
                }
                let vn = vn0[i] + (0..n).map(|j| self.k[i * n + j] * delta[j]).sum::<f64>();
                let new = (rows[i].lambda + delta[i] + (rows[i].target - vn) / kii).max(0.0);
                let d = new - rows[i].lambda;
                change = change.max((d - delta[i]).abs());
                delta[i] = d;
            }
            if change <= 1e-15 * scale {
                break;
            }
        }
        for (r, d) in rows.iter_mut().zip(delta) {
            if d != 0.0 {
                r.lambda += d;
                bodies.apply(r.a, r.p, r.n * -d);
                bodies.apply(r.b, r.p, r.n * d);
            }
        }
    }
}

/// Isotropic Coulomb friction: the accumulated tangential impulse is kept
/// inside the disk of radius `mu * lambda`.
fn solve_friction(r: &mut Row, bodies: &mut Bodies) {
    let rel = bodies.velocity_at(r.b, r.p) - bodies.velocity_at(r.a, r.p);
    let vt = rel - r.n * rel.dot(r.n);
    let speed = vt.norm();
    if speed == 0.0 {
        return;
    }
    let t = vt / speed;
    let k = bodies.inv_mass_along(r.a, r.p, t) + bodies.inv_mass_along(r.b, r.p, t);
    if k <= 0.0 {
        return;
    }
    let mut acc = r.tangent - vt / k;
    acc = acc - r.n * acc.dot(r.n);
    let cap = r.mu * r.lambda;
    let len = acc.norm();
    if len > cap {
        acc = acc * (cap / len);
    }
    let dj = acc - r.tangent;
    r.tangent = acc;
    bodies.apply(r.a, r.p, -dj);
    bodies.apply(r.b, r.p, dj);
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

fn motion(from: &RigidTransform, to: &RigidTransform, dt: f64) -> (Vec3, Vec3) {
    let v = (to.translation - from.translation) / dt;
    let w = (to.rotation * from.rotation.inverse()).to_rotation_vector() / dt;
    (v, w)
}

impl WorldState {
    pub fn new(objects: Vec<ObjectAsset>, table: Plane) -> Result<Self, DynamicsError> {
        let w = Self { objects, table, ..Self::default() };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::InvalidParams);
        }
        for (i, o) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|p| p.id == o.id) {
                return Err(DynamicsError::DuplicateId(o.id.clone()));
            }
            o.params.validate()?;
        }
        Ok(())
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectAsset> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn poses(&self) -> Vec<(String, RigidTransform)> {
        self.objects.iter().map(|o| (o.id.clone(), o.pose())).collect()
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.objects.iter().map(|o| o.kinetic_energy()).sum()
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self) -> f64 {
        self.objects
            .iter()
            .filter(|o| !o.is_static())
            .map(|o| o.kinetic_energy() - o.params.mass * self.gravity.dot(o.center_of_mass()))
            .sum::<f64>()
    }

    /// Background and all objects' splats, in world coordinates.
    pub fn world_splats(&self) -> GaussianSet {
        let mut out = self.background_splats.clone();
        for o in &self.objects {
            let s = o.world_splats();
            out.sh_degree = out.sh_degree.max(s.sh_degree);
            out.gaussians.extend(s.gaussians);
        }
        out
    }

    /// Position-control object `i` to `target` over the next step.
    pub fn drive(&mut self, i: usize, target: RigidTransform) {
        let o = &mut self.objects[i];
        o.drive = Some(target);
        o.asleep = false;
        o.still_steps = 0;
    }

    /// Release a driven object with zero velocity.
    pub fn release(&mut self, i: usize) {
        let o = &mut self.objects[i];
        o.drive = None;
        o.state.velocity = Vec3::ZERO;
        o.state.angular_velocity = Vec3::ZERO;
        o.asleep = false;
        o.still_steps = 0;
    }

    pub fn step(&mut self) -> Result<Vec<PoseDelta>, DynamicsError> {
        self.step_with(&[])
    }

    /// Advance one step of `dt`, with optional kinematic hulls moving from
    /// their `from` to their `to` pose over the step.
    pub fn step_with(&mut self, kinematic: &[KinematicHull]) -> Result<Vec<PoseDelta>, DynamicsError> {
        let dt = self.dt;
        let cfg = self.solver;
        let n = self.objects.len();
        let before: Vec<RigidTransform> = self.objects.iter().map(|o| o.pose()).collect();

        // kinematic velocities of driven objects
        let mut driven: Vec<Option<(Vec3, Vec3)>> = vec![None; n];
        for (i, o) in self.objects.iter_mut().enumerate() {
            if let Some(target) = o.drive.take() {
                if o.is_static() {
                    continue;
                }
                let (v, w) = motion(&before[i], &target, dt);
                let com = before[i].apply_point(o.mass.center_of_mass);
                // velocity of the center of mass
                let v = v + w.cross(com - before[i].translation);
                o.state.velocity = v;
                o.state.angular_velocity = w;
                driven[i] = Some((v, w));
                o.drive = Some(target);
            }
        }
        let dynamic = |o: &ObjectAsset, i: usize| !o.is_static() && driven[i].is_none();

        let placed: Vec<PlacedHull> = self.objects.iter().map(|o| PlacedHull::new(&o.hull, &o.polygons, &o.pose())).collect();
        let radius: Vec<f64> = self
            .objects
            .iter()
            .map(|o| o.hull.vertices.iter().map(|v| v.distance(o.mass.center_of_mass)).fold(0.0, f64::max))
            .collect();
        let reach = |i: usize, o: &ObjectAsset, gravity: Vec3| {
            if o.is_static() {
                return 0.0;
            }
            let v = o.state.velocity + if driven[i].is_none() { gravity * dt } else { Vec3::ZERO };
            (v.norm() + o.state.angular_velocity.norm() * radius[i]) * dt
        };

        // contacts at start-of-step positions
        struct Pair {
            a: usize,
            b: Option<usize>,
            contacts: Vec<Contact>,
        }
        let mut pairs: Vec<Pair> = Vec::new();
        let footprint: Vec<Plane> = self
            .workspace
            .planes()
            .into_iter()
            .filter(|p| p.normal.dot(self.table.normal).abs() < 0.5)
            .collect();
        for (i, o) in self.objects.iter().enumerate() {
            if !dynamic(o, i) {
                continue;
            }
            let margin = cfg.margin + reach(i, o, self.gravity);
            let c = plane_contacts(&self.table, &placed[i], margin, &footprint);
            if !c.is_empty() {
                pairs.push(Pair { a: i, b: None, contacts: c });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (oi, oj) = (&self.objects[i], &self.objects[j]);
                if !dynamic(oi, i) && !dynamic(oj, j) {
                    continue;
                }
                if oi.asleep && oj.asleep {
                    // still resting against each other; keep the island link
                    if placed[i].aabb_overlaps(&placed[j], cfg.margin) {
                        pairs.push(Pair { a: i, b: Some(j), contacts: Vec::new() });
                    }
                    continue;
                }
                let margin = cfg.margin + reach(i, oi, self.gravity) + reach(j, oj, self.gravity);
                let c = placed_hull_contact(&placed[i], &placed[j], margin);
                if !c.is_empty() {
                    pairs.push(Pair { a: i, b: Some(j), contacts: c });
                }
            }
        }

        // kinematic hull contacts
        struct KinPair {
            body: usize,
            v: Vec3,
            w: Vec3,
            pivot: Vec3,
            contacts: Vec<Contact>,
        }
        let mut kin_pairs: Vec<KinPair> = Vec::new();
        for k in kinematic {
            let (v, w) = motion(&k.from, &k.to, dt);
            let hull = PlacedHull::new(&k.hull, &k.polygons, &k.from);
            let kr = k.hull.vertices.iter().map(|p| p.norm()).fold(0.0, f64::max);
            let kreach = (v.norm() + w.norm() * kr) * dt;
            for i in 0..n {
                if k.ignore == Some(i) || !dynamic(&self.objects[i], i) {
                    continue;
                }
                let margin = cfg.margin + kreach + reach(i, &self.objects[i], self.gravity);
                let c = placed_hull_contact(&hull, &placed[i], margin);
                if !c.is_empty() {
                    kin_pairs.push(KinPair { body: i, v, w, pivot: k.from.translation, contacts: c });
                }
            }
        }

        // islands of touching dynamic bodies
        let mut parent: Vec<usize> = (0..n).collect();
        for p in &pairs {
            if let Some(b) = p.b {
                if dynamic(&self.objects[p.a], p.a) && dynamic(&self.objects[b], b) {
                    union(&mut parent, p.a, b);
                }
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut island_awake = vec![false; n];
        let mut island_pushed = vec![false; n];
        for i in 0..n {
            if dynamic(&self.objects[i], i) && !self.objects[i].asleep {
                island_awake[roots[i]] = true;
            }
        }
        for p in &pairs {
            for s in [Some(p.a), p.b].into_iter().flatten() {
                if driven[s].is_some() {
                    let other = if s == p.a { p.b } else { Some(p.a) };
                    if let Some(o) = other {
                        island_pushed[roots[o]] = true;
                    }
                }
            }
        }
        for k in &kin_pairs {
            island_pushed[roots[k.body]] = true;
        }
        for i in 0..n {
            let r = roots[i];
            if island_pushed[r] {
                island_awake[r] = true;
            }
            if dynamic(&self.objects[i], i) && island_awake[r] {
                let o = &mut self.objects[i];
                o.asleep = false;
                if island_pushed[r] {
                    o.still_steps = 0;
                }
            }
        }
        let active = |objects: &[ObjectAsset], i: usize| dynamic(&objects[i], i) && !objects[i].asleep;

        // velocities after gravity
        let mut bodies = Bodies {
            v: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            com: Vec::with_capacity(n),
            inv_m: Vec::with_capacity(n),
            inv_i: Vec::with_capacity(n),
        };
        for (i, o) in self.objects.iter().enumerate() {
            let act = active(&self.objects, i);
            bodies.v.push(if act { o.state.velocity + self.gravity * dt } else { o.state.velocity });
            bodies.w.push(o.state.angular_velocity);
            bodies.com.push(o.center_of_mass());
            bodies.inv_m.push(if act { o.inv_mass() } else { 0.0 });
            bodies.inv_i.push(if act { o.inv_inertia_world() } else { Mat3::ZERO });
        }
        let side = |i: usize| -> Side {
            if let Some((v, w)) = driven[i] {
                Side::Moving { v, w, pivot: bodies.com[i] }
            } else if active(&self.objects, i) {
                Side::Dynamic(i)
            } else {
                Side::Static
            }
        };

        let mut rows: Vec<Row> = Vec::new();
        let mut manifolds: Vec<Manifold> = Vec::new();
        let push_rows = |rows: &mut Vec<Row>, manifolds: &mut Vec<Manifold>, a: Side, b: Side, contacts: &[Contact], mu: f64, e: f64, bodies: &Bodies| {
            let start = rows.len();
            for c in contacts {
                let vn = (bodies.velocity_at(b, c.point) - bodies.velocity_at(a, c.point)).dot(c.normal);
                let mut target = if c.separation > 0.0 {
                    -c.separation / dt
                } else if c.separation < -cfg.slop {
                    cfg.baumgarte * (-c.separation - cfg.slop) / dt
                } else {
                    0.0
                };
                if e > 0.0 && vn < -cfg.bounce_threshold {
                    target = target.max(-e * vn);
                }
                let k = bodies.inv_mass_along(a, c.point, c.normal) + bodies.inv_mass_along(b, c.point, c.normal);
                if k <= 0.0 {
                    continue;
                }
                rows.push(Row { a, b, n: c.normal, p: c.point, target, mass_n: 1.0 / k, mu, lambda: 0.0, tangent: Vec3::ZERO });
            }
            if rows.len() > start {
                manifolds.push(Manifold::new(&rows[start..], start, bodies));
            }
        };
        for p in &pairs {
            let oa = &self.objects[p.a];
            match p.b {
                None => {
                    if !active(&self.objects, p.a) {
                        continue;
                    }
                    let mu = (oa.params.friction * self.table_friction).sqrt();
                    let e = oa.params.restitution;
                    push_rows(&mut rows, &mut manifolds, Side::Static, side(p.a), &p.contacts, mu, e, &bodies);
                }
                Some(b) => {
                    let ob = &self.objects[b];
                    let (sa, sb) = (side(p.a), side(b));
                    if matches!(sa, Side::Dynamic(_)) || matches!(sb, Side::Dynamic(_)) {
                        let mu = (oa.params.friction * ob.params.friction).sqrt();
                        let e = oa.params.restitution.max(ob.params.restitution);
                        push_rows(&mut rows, &mut manifolds, sa, sb, &p.contacts, mu, e, &bodies);
                    }
                }
            }
        }
        for k in &kin_pairs {
            let o = &self.objects[k.body];
            if !active(&self.objects, k.body) {
                continue;
            }
            let mu = o.params.friction;
            push_rows(&mut rows, &mut manifolds, Side::Moving { v: k.v, w: k.w, pivot: k.pivot }, Side::Dynamic(k.body), &k.contacts, mu, 0.0, &bodies);
        }

        // sequential impulses; the normal rows of each manifold are solved together
        for _ in 0..cfg.iterations {
            for m in &manifolds {
                m.solve_normals(&mut rows, &mut bodies);
                for r in rows[m.start..m.start + m.len].iter_mut() {
                    if r.mu > 0.0 {
                        solve_friction(r, &mut bodies);
                    }
                }
            }
        }

        // integrate
        for (i, o) in self.objects.iter_mut().enumerate() {
            if driven[i].is_some() {
                let target = o.drive.take().expect("driven");
                o.state.position = target.translation;
                o.state.orientation = target.rotation;
                continue;
            }
            if o.is_static() || o.asleep {
                continue;
            }
            let c = o.mass.center_of_mass;
            let (v, w) = (bodies.v[i], bodies.w[i]);
            let r_old = o.state.orientation;
            let r_new = r_old.integrate(w, dt);
            o.state.velocity = v;
            o.state.angular_velocity = w;
            o.state.orientation = r_new;
            let swing = if r_new == r_old { Vec3::ZERO } else { r_old.rotate(c) - r_new.rotate(c) };
            o.state.position = o.state.position + v * dt + swing;
            if !o.state.is_finite() {
                return Err(DynamicsError::NonFiniteState(o.id.clone()));
            }
        }

        // sleeping
        for i in 0..n {
            if !active(&self.objects, i) {
                continue;
            }
            let o = &mut self.objects[i];
            let still = o.state.velocity.norm() < cfg.sleep_linear && o.state.angular_velocity.norm() < cfg.sleep_angular;
            o.still_steps = if still && !island_pushed[roots[i]] { o.still_steps.saturating_add(1) } else { 0 };
        }
        let mut island_ready = vec![true; n];
        for i in 0..n {
            if dynamic(&self.objects[i], i) && self.objects[i].still_steps < cfg.sleep_steps {
                island_ready[roots[i]] = false;
            }
        }
        for i in 0..n {
            if active(&self.objects, i) && island_ready[roots[i]] {
                let o = &mut self.objects[i];
                o.asleep = true;
                o.state.velocity = Vec3::ZERO;
                o.state.angular_velocity = Vec3::ZERO;
            }
        }

        Ok(self.objects.iter().zip(&before).map(|(o, b)| PoseDelta::between(b, &o.pose())).collect())
    }

    /// Step until every body rests or `max_steps` is reached.
    pub fn settle(&mut self, max_steps: usize, v_eps: f64, w_eps: f64) -> Result<SettleReport, DynamicsError> {
        let resting = |w: &WorldState| {
            w.objects.iter().all(|o| {
                o.is_static()
                    || o.asleep
                    || (o.still_steps > 0 && o.state.velocity.norm() < v_eps && o.state.angular_velocity.norm() < w_eps)
            })
        };
        if resting(self) {
            return Ok(SettleReport { steps: 0, converged: true });
        }
        for k in 1..=max_steps {
            self.step()?;
            if resting(self) {
                return Ok(SettleReport { steps: k, converged: true });
            }
        }
        Ok(SettleReport { steps: max_steps, converged: false })
    }
}
