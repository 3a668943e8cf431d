use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math::{Aabb, Transform, Vec2};
use crate::physics::body::{Body, BodyId};
use crate::physics::collide::{collide, Manifold};
use crate::physics::shape::Shape;

/// Tunable constants of the simulator. Fixed for the lifetime of a world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsConfig {
    pub gravity: Vec2,
    pub dt: f64,
    pub velocity_iterations: usize,
    pub position_iterations: usize,
    /// Approach speed below which contacts do not bounce.
    pub restitution_threshold: f64,
    pub linear_slop: f64,
    pub baumgarte: f64,
    pub max_correction: f64,
    /// Rolling resistance coefficient, dimensionless (scaled by circle radius).
    pub rolling_resistance: f64,
    pub max_speed: f64,
    pub speculative_distance: f64,
    pub settle_linear: f64,
    pub settle_angular: f64,
    pub settle_ticks: u32,
    /// Dynamic bodies leaving this box are destroyed.
    pub kill_bounds: Option<Aabb>,
    /// When false, contacts never reduce health (used to pre-settle levels).
    pub damage: bool,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            gravity: Vec2::new(0.0, -9.8),
            dt: 1.0 / 60.0,
            velocity_iterations: 10,
            position_iterations: 4,
            restitution_threshold: 1.0,
            linear_slop: 0.005,
            baumgarte: 0.2,
            max_correction: 0.2,
            rolling_resistance: 0.1,
            max_speed: 150.0,
            speculative_distance: 0.02,
            settle_linear: 0.05,
            settle_angular: 0.05,
            settle_ticks: 30,
            kill_bounds: None,
            damage: true,
        }
    }
}

/// Total impulse exchanged by one body pair during one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub body_a: BodyId,
    pub body_b: BodyId,
    pub point: Vec2,
    /// Unit normal from `body_a` towards `body_b`.
    pub normal: Vec2,
    pub impulse: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct CachedImpulse {
    normal: f64,
    tangent: f64,
}

#[derive(Clone, Copy)]
struct PointConstraint {
    r_a: Vec2,
    r_b: Vec2,
    local_a: Vec2,
    local_b: Vec2,
    separation: f64,
    normal_mass: f64,
    tangent_mass: f64,
    normal_impulse: f64,
    tangent_impulse: f64,
    max_normal_impulse: f64,
    approach_speed: f64,
    id: u32,
}

struct PairConstraint {
    a: usize,
    b: usize,
    normal: Vec2,
    local_normal: Vec2,
    friction: f64,
    restitution: f64,
    rolling_limit: f64,
    rolling_impulse: f64,
    points: [PointConstraint; 2],
    count: usize,
}

#[derive(Clone, Debug)]
pub struct World {
    config: PhysicsConfig,
    bodies: Vec<Body>,
    tick: u64,
    pub rng_seed: u64,
    next_id: BodyId,
    cache: BTreeMap<(BodyId, BodyId, u32), CachedImpulse>,
    rolling_cache: BTreeMap<(BodyId, BodyId), f64>,
    removed: Vec<BodyId>,
}

impl World {
    pub fn new(config: PhysicsConfig, rng_seed: u64) -> World {
        World {
            config,
            bodies: Vec::new(),
            tick: 0,
            rng_seed,
            next_id: 1,
            cache: BTreeMap::new(),
            rolling_cache: BTreeMap::new(),
            removed: Vec::new(),
        }
    }

    pub fn config(&self) -> &PhysicsConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut PhysicsConfig {
        &mut self.config
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn gravity(&self) -> Vec2 {
        self.config.gravity
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    /// Inserts a body and returns its id. Ids grow monotonically so the body
    /// list stays ordered by id.
    pub fn add(&mut self, mut body: Body) -> BodyId {
        body.id = self.next_id;
        self.next_id += 1;
        if !body.dynamic {
            body.linear_velocity = Vec2::ZERO;
            body.angular_velocity = 0.0;
        }
        let id = body.id;
        self.bodies.push(body);
        id
    }

    /// Inserts a body keeping its preset id; `id` must exceed every existing id.
    pub fn add_with_id(&mut self, body: Body) -> BodyId {
        assert!(body.id >= self.next_id, "body ids must be inserted in increasing order");
        self.next_id = body.id;
        self.add(body)
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn body(&self, id: BodyId) -> Option<&Body> {
        self.index_of(id).map(|i| &self.bodies[i])
    }

    pub fn body_mut(&mut self, id: BodyId) -> Option<&mut Body> {
        self.index_of(id).map(move |i| &mut self.bodies[i])
    }

    fn index_of(&self, id: BodyId) -> Option<usize> {
        self.bodies.binary_search_by_key(&id, |b| b.id).ok()
    }

    /// Ids removed at the end of the most recent tick (or `remove_dead` call).
    pub fn removed_last_tick(&self) -> &[BodyId] {
        &self.removed
    }

    pub fn remove(&mut self, id: BodyId) -> Option<Body> {
        self.index_of(id).map(|i| self.bodies.remove(i))
    }

    /// Removes every body whose health is exhausted.
    pub fn remove_dead(&mut self) -> Vec<BodyId> {
        let mut dead = Vec::new();
        self.bodies.retain(|b| {
            if b.health <= 0.0 {
                dead.push(b.id);
                false
            } else {
                true
            }
        });
        self.removed.extend_from_slice(&dead);
        dead
    }

    /// Kinetic plus gravitational potential energy of dynamic bodies, with
    /// potential measured from the origin.
    pub fn total_energy(&self) -> f64 {
        self.bodies
            .iter()
            .filter(|b| b.dynamic)
            .map(|b| b.kinetic_energy() - b.mass * self.config.gravity.dot(b.position))
            .sum()
    }

    /// True when no dynamic body exceeds the settle thresholds right now.
    pub fn is_calm(&self) -> bool {
        let c = &self.config;
        self.bodies
            .iter()
            .filter(|b| b.dynamic)
            .all(|b| b.linear_velocity.length() < c.settle_linear && b.angular_velocity.abs() < c.settle_angular)
    }

    /// 64-bit FNV-1a digest of the complete dynamic state.
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.tick);
        for b in &self.bodies {
            h.write_u64(b.id as u64);
            for v in [
                b.position.x,
                b.position.y,
                b.rotation,
                b.linear_velocity.x,
                b.linear_velocity.y,
                b.angular_velocity,
                b.health,
            ] {
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }

    /// Applies a radial impulse and direct damage around `center`, both
    /// decaying linearly to zero at `radius`. Returns the ids touched.
    pub fn apply_blast(
        &mut self,
        center: Vec2,
        radius: f64,
        impulse: f64,
        damage: f64,
        exclude: &[BodyId],
    ) -> Vec<BodyId> {
        let mut hit = Vec::new();
        for b in self.bodies.iter_mut() {
            if !b.dynamic || b.sensor || exclude.contains(&b.id) {
                continue;
            }
            let d = b.shape.distance(&b.transform(), center);
            if d >= radius {
                continue;
            }
            let falloff = 1.0 - d / radius;
            let dir = (b.position - center).normalized();
            let dir = if dir == Vec2::ZERO { Vec2::new(0.0, 1.0) } else { dir };
            b.linear_velocity += dir * (impulse * falloff * b.inv_mass);
            b.health -= damage * falloff;
            hit.push(b.id);
        }
        hit
    }

    /// Advances exactly one tick and returns the per-pair contact impulses.
    pub fn step(&mut self) -> Vec<Contact> {
        self.removed.clear();
        let dt = self.config.dt;
        let inv_dt = 1.0 / dt;
        let next_time = (self.tick + 1) as f64 * dt;
        let start_energy: Vec<f64> = self.bodies.iter().map(|b| self.body_energy(b)).collect();

        for b in self.bodies.iter_mut() {
            if b.dynamic {
                b.linear_velocity += self.config.gravity * dt;
                let speed = b.linear_velocity.length();
                if speed > self.config.max_speed {
                    b.linear_velocity = b.linear_velocity * (self.config.max_speed / speed);
                }
            } else if let Some(path) = b.path {
                b.linear_velocity = (path.position_at(next_time) - b.position) * inv_dt;
            }
        }

        let pre_solve: Vec<(Vec2, f64)> = self.bodies.iter().map(|b| (b.linear_velocity, b.angular_velocity)).collect();
        let mut pairs = self.build_constraints();
        self.warm_start(&pairs);
        for _ in 0..self.config.velocity_iterations {
            self.solve_velocities(&mut pairs, inv_dt);
        }
        self.apply_restitution(&mut pairs);
        self.store_impulses(&pairs);
        let (roots, driven) = self.islands(&pairs);
        self.limit_island_velocities(&roots, &driven, &start_energy);

        for b in self.bodies.iter_mut() {
            if b.dynamic {
                b.position += b.linear_velocity * dt;
                b.rotation += b.angular_velocity * dt;
            } else if let Some(path) = b.path {
                b.position = path.position_at(next_time);
            }
        }

        let uncorrected: Vec<(Vec2, f64)> = self.bodies.iter().map(|b| (b.position, b.rotation)).collect();
        for _ in 0..self.config.position_iterations {
            self.solve_positions(&pairs);
        }
        self.dissipate_island_gains(&roots, &driven, &start_energy, &uncorrected);

        let contacts = self.collect_contacts(&pairs);
        if self.config.damage {
            self.apply_damage(&contacts);
            self.break_through(&contacts, &pre_solve);
        }

        if let Some(bounds) = self.config.kill_bounds {
            for b in self.bodies.iter_mut() {
                if b.dynamic && !bounds.contains(b.position) {
                    b.health = 0.0;
                }
            }
        }
        self.remove_dead();
        self.tick += 1;
        contacts
    }

    /// Health loss from contact impulses; platforms are unaffected.
    pub fn apply_damage(&mut self, contacts: &[Contact]) {
        for c in contacts {
            for id in [c.body_a, c.body_b] {
                if let Some(b) = self.body_mut(id) {
                    if b.dynamic {
                        b.health -= b.material.damage_from_impulse(c.impulse);
                    }
                }
            }
        }
    }

    /// A body that shatters another keeps the share of its pre-contact
    /// velocity that the blow had in excess of the victim's remaining health.
    fn break_through(&mut self, contacts: &[Contact], pre_solve: &[(Vec2, f64)]) {
        let mut keep: Vec<(usize, f64)> = Vec::new();
        for c in contacts {
            for (victim, striker) in [(c.body_a, c.body_b), (c.body_b, c.body_a)] {
                let (Some(vi), Some(si)) = (self.index_of(victim), self.index_of(striker)) else {
                    continue;
                };
                let (v, s) = (&self.bodies[vi], &self.bodies[si]);
                if !v.dynamic || !s.dynamic || v.health > 0.0 || s.health <= 0.0 {
                    continue;
                }
                let dealt = v.material.damage_from_impulse(c.impulse);
                if dealt <= 0.0 {
                    continue;
                }
                let share = (-v.health / dealt).clamp(0.0, 1.0);
                match keep.iter_mut().find(|(i, _)| *i == si) {
                    Some(k) => k.1 = k.1.max(share),
                    None => keep.push((si, share)),
                }
            }
        }
        for (i, share) in keep {
            let (v0, w0) = pre_solve[i];
            let b = &mut self.bodies[i];
            b.linear_velocity = v0 * share + b.linear_velocity * (1.0 - share);
            b.angular_velocity = w0 * share + b.angular_velocity * (1.0 - share);
        }
    }

    fn body_energy(&self, b: &Body) -> f64 {
        if b.dynamic {
            b.kinetic_energy() - b.mass * self.config.gravity.dot(b.position)
        } else {
            0.0
        }
    }

    /// Union-find over dynamic bodies joined by contact constraints. Returns
    /// each body's island root and whether the island touches a scheduled body.
    fn islands(&self, pairs: &[PairConstraint]) -> (Vec<usize>, Vec<bool>) {
        let n = self.bodies.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut driven = alloc::vec![false; n];
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for pc in pairs {
            let (a, b) = (&self.bodies[pc.a], &self.bodies[pc.b]);
            match (a.dynamic, b.dynamic) {
                (true, true) => {
                    let ra = find(&mut parent, pc.a);
                    let rb = find(&mut parent, pc.b);
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                (true, false) if b.path.is_some() => driven[pc.a] = true,
                (false, true) if a.path.is_some() => driven[pc.b] = true,
                _ => {}
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut island_driven = alloc::vec![false; n];
        for i in 0..n {
            island_driven[roots[i]] |= driven[i];
        }
        (roots, island_driven)
    }

    /// Contact resolution may not create energy. Before positions are
    /// integrated, each island's velocities are scaled by the largest factor
    /// in [0, 1] for which kinetic plus post-integration potential energy
    /// stays at or below the energy the island had when the tick began.
    fn limit_island_velocities(&mut self, roots: &[usize], driven: &[bool], start_energy: &[f64]) {
        let n = self.bodies.len();
        let dt = self.config.dt;
        let g = self.config.gravity;
        // E(f) = a f^2 + b f + c relative to the start energy.
        let mut a = alloc::vec![0.0; n];
        let mut b = alloc::vec![0.0; n];
        let mut c = alloc::vec![0.0; n];
        for (i, body) in self.bodies.iter().enumerate() {
            if !body.dynamic {
                continue;
            }
            let r = roots[i];
            a[r] += body.kinetic_energy();
            b[r] -= body.mass * g.dot(body.linear_velocity) * dt;
            c[r] += -body.mass * g.dot(body.position) - start_energy[i];
        }
        for i in 0..n {
            if !self.bodies[i].dynamic || driven[roots[i]] {
                continue;
            }
            let r = roots[i];
            if a[r] + b[r] + c[r] <= 0.0 || a[r] <= 0.0 {
                continue;
            }
            let disc = (b[r] * b[r] - 4.0 * a[r] * c[r]).max(0.0);
            let factor = ((-b[r] + libm::sqrt(disc)) / (2.0 * a[r])).clamp(0.0, 1.0);
            let body = &mut self.bodies[i];
            body.linear_velocity = body.linear_velocity * factor;
            body.angular_velocity *= factor;
        }
    }

    /// Position correction can lift bodies. The surplus is taken from the
    /// island's kinetic energy; what remains is removed by blending the
    /// island's correction back towards the uncorrected poses.
    fn dissipate_island_gains(
        &mut self,
        roots: &[usize],
        driven: &[bool],
        start_energy: &[f64],
        uncorrected: &[(Vec2, f64)],
    ) {
        let n = self.bodies.len();
        let mut surplus = alloc::vec![0.0; n];
        let mut kinetic = alloc::vec![0.0; n];
        for i in 0..n {
            if !self.bodies[i].dynamic {
                continue;
            }
            let r = roots[i];
            surplus[r] += self.body_energy(&self.bodies[i]) - start_energy[i];
            kinetic[r] += self.bodies[i].kinetic_energy();
        }
        for i in 0..n {
            let r = roots[i];
            if !self.bodies[i].dynamic || driven[r] || surplus[r] <= 0.0 || kinetic[r] <= 0.0 {
                continue;
            }
            let factor = libm::sqrt((kinetic[r] - surplus[r]).max(0.0) / kinetic[r]);
            let b = &mut self.bodies[i];
            b.linear_velocity = b.linear_velocity * factor;
            b.angular_velocity *= factor;
        }

        // Residual after kinetic energy is exhausted.
        let g = self.config.gravity;
        let mut residual = alloc::vec![0.0; n];
        let mut lift = alloc::vec![0.0; n];
        for i in 0..n {
            let body = &self.bodies[i];
            if !body.dynamic {
                continue;
            }
            let r = roots[i];
            residual[r] += self.body_energy(body) - start_energy[i];
            lift[r] += -body.mass * g.dot(body.position - uncorrected[i].0);
        }
        for i in 0..n {
            let r = roots[i];
            if !self.bodies[i].dynamic || driven[r] || residual[r] <= 0.0 || lift[r] <= 0.0 {
                continue;
            }
            let keep = (1.0 - residual[r] / lift[r]).clamp(0.0, 1.0);
            let (p0, a0) = uncorrected[i];
            let b = &mut self.bodies[i];
            b.position = p0 + (b.position - p0) * keep;
            b.rotation = a0 + (b.rotation - a0) * keep;
        }
    }

    fn build_constraints(&self) -> Vec<PairConstraint> {
        let dt = self.config.dt;
        let mut pairs = Vec::new();
        let n = self.bodies.len();
        let boxes: Vec<Aabb> = self.bodies.iter().map(|b| b.aabb()).collect();
        for i in 0..n {
            let a = &self.bodies[i];
            if a.sensor {
                continue;
            }
            let reach_a = (a.linear_velocity.length() + a.angular_velocity.abs() * a.shape.bounding_radius()) * dt;
            for j in (i + 1)..n {
                let b = &self.bodies[j];
                if b.sensor || (!a.dynamic && !b.dynamic) || (a.group != 0 && a.group == b.group) {
                    continue;
                }
                let reach_b = (b.linear_velocity.length() + b.angular_velocity.abs() * b.shape.bounding_radius()) * dt;
                let margin = self.config.speculative_distance + reach_a + reach_b;
                if !boxes[i].inflate(margin).overlaps(&boxes[j]) {
                    continue;
                }
                let xa = a.transform();
                let xb = b.transform();
                if let Some(m) = collide(&a.shape, &xa, &b.shape, &xb, margin) {
                    pairs.push(self.make_pair(i, j, &xa, &xb, &m));
                }
            }
        }
        pairs
    }

    fn make_pair(&self, i: usize, j: usize, xa: &Transform, xb: &Transform, m: &Manifold) -> PairConstraint {
        let a = &self.bodies[i];
        let b = &self.bodies[j];
        let normal = m.normal;
        let tangent = normal.perp();
        let rolling_radius = match (a.shape, b.shape) {
            (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => 0.5 * (ra + rb),
            (Shape::Circle { radius }, _) | (_, Shape::Circle { radius }) => radius,
            _ => 0.0,
        };
        let mut pc = PairConstraint {
            a: i,
            b: j,
            normal,
            local_normal: xa.q.apply_inv(normal),
            friction: libm::sqrt(a.material.friction * b.material.friction),
            restitution: a.material.restitution.max(b.material.restitution),
            rolling_limit: self.config.rolling_resistance * rolling_radius,
            rolling_impulse: self.rolling_cache.get(&(a.id, b.id)).copied().unwrap_or(0.0),
            points: [PointConstraint {
                r_a: Vec2::ZERO,
                r_b: Vec2::ZERO,
                local_a: Vec2::ZERO,
                local_b: Vec2::ZERO,
                separation: 0.0,
                normal_mass: 0.0,
                tangent_mass: 0.0,
                normal_impulse: 0.0,
                tangent_impulse: 0.0,
                max_normal_impulse: 0.0,
                approach_speed: 0.0,
                id: 0,
            }; 2],
            count: m.count,
        };
        for (k, mp) in m.points().iter().enumerate() {
            let mid = (mp.point_a + mp.point_b) * 0.5;
            let r_a = mid - a.position;
            let r_b = mid - b.position;
            let rn_a = r_a.cross(normal);
            let rn_b = r_b.cross(normal);
            let k_normal = a.inv_mass + b.inv_mass + a.inv_inertia * rn_a * rn_a + b.inv_inertia * rn_b * rn_b;
            let rt_a = r_a.cross(tangent);
            let rt_b = r_b.cross(tangent);
            let k_tangent = a.inv_mass + b.inv_mass + a.inv_inertia * rt_a * rt_a + b.inv_inertia * rt_b * rt_b;
            let dv = b.velocity_at(mid) - a.velocity_at(mid);
            let cached = self.cache.get(&(a.id, b.id, mp.id)).copied().unwrap_or_default();
            pc.points[k] = PointConstraint {
                r_a,
                r_b,
                local_a: xa.apply_inv(mp.point_a),
                local_b: xb.apply_inv(mp.point_b),
                separation: mp.separation,
                normal_mass: if k_normal > 0.0 { 1.0 / k_normal } else { 0.0 },
                tangent_mass: if k_tangent > 0.0 { 1.0 / k_tangent } else { 0.0 },
                normal_impulse: cached.normal,
                tangent_impulse: cached.tangent,
                max_normal_impulse: 0.0,
                approach_speed: dv.dot(normal),
                id: mp.id,
            };
        }
        pc
    }

    fn apply_pair_impulse(&mut self, a: usize, b: usize, p: Vec2, r_a: Vec2, r_b: Vec2) {
        let (ba, bb) = pair_mut(&mut self.bodies, a, b);
        if ba.dynamic {
            ba.linear_velocity -= p * ba.inv_mass;
            ba.angular_velocity -= ba.inv_inertia * r_a.cross(p);
        }
        if bb.dynamic {
            bb.linear_velocity += p * bb.inv_mass;
            bb.angular_velocity += bb.inv_inertia * r_b.cross(p);
        }
    }

    fn warm_start(&mut self, pairs: &[PairConstraint]) {
        for pc in pairs {
            let tangent = pc.normal.perp();
            for pt in &pc.points[..pc.count] {
                let p = pc.normal * pt.normal_impulse + tangent * pt.tangent_impulse;
                self.apply_pair_impulse(pc.a, pc.b, p, pt.r_a, pt.r_b);
            }
            if pc.rolling_impulse != 0.0 {
                let (ba, bb) = pair_mut(&mut self.bodies, pc.a, pc.b);
                ba.angular_velocity -= ba.inv_inertia * pc.rolling_impulse;
                bb.angular_velocity += bb.inv_inertia * pc.rolling_impulse;
            }
        }
    }

    fn relative_velocity(&self, pc: &PairConstraint, pt: &PointConstraint) -> Vec2 {
        let a = &self.bodies[pc.a];
        let b = &self.bodies[pc.b];
        (b.linear_velocity + Vec2::cross_sv(b.angular_velocity, pt.r_b))
            - (a.linear_velocity + Vec2::cross_sv(a.angular_velocity, pt.r_a))
    }

    fn solve_velocities(&mut self, pairs: &mut [PairConstraint], inv_dt: f64) {
        for pc in pairs.iter_mut() {
            let tangent = pc.normal.perp();

            if pc.rolling_limit > 0.0 {
                let total_normal: f64 = pc.points[..pc.count].iter().map(|p| p.normal_impulse).sum();
                let limit = pc.rolling_limit * total_normal;
                let (ba, bb) = pair_mut(&mut self.bodies, pc.a, pc.b);
                let k = ba.inv_inertia + bb.inv_inertia;
                if k > 0.0 {
                    let dw = bb.angular_velocity - ba.angular_velocity;
                    let old = pc.rolling_impulse;
                    pc.rolling_impulse = (old - dw / k).clamp(-limit, limit);
                    let delta = pc.rolling_impulse - old;
                    ba.angular_velocity -= ba.inv_inertia * delta;
                    bb.angular_velocity += bb.inv_inertia * delta;
                }
            }

            for k in 0..pc.count {
                let pt = pc.points[k];
                let vt = self.relative_velocity(pc, &pt).dot(tangent);
                let max_f = pc.friction * pt.normal_impulse;
                let new_impulse = (pt.tangent_impulse - pt.tangent_mass * vt).clamp(-max_f, max_f);
                let delta = new_impulse - pt.tangent_impulse;
                pc.points[k].tangent_impulse = new_impulse;
                self.apply_pair_impulse(pc.a, pc.b, tangent * delta, pt.r_a, pt.r_b);
            }

            for k in 0..pc.count {
                let pt = pc.points[k];
                let vn = self.relative_velocity(pc, &pt).dot(pc.normal);
                let bias = if pt.separation > 0.0 { pt.separation * inv_dt } else { 0.0 };
                let new_impulse = (pt.normal_impulse - pt.normal_mass * (vn + bias)).max(0.0);
                let delta = new_impulse - pt.normal_impulse;
                pc.points[k].normal_impulse = new_impulse;
                pc.points[k].max_normal_impulse = pc.points[k].max_normal_impulse.max(new_impulse);
                self.apply_pair_impulse(pc.a, pc.b, pc.normal * delta, pt.r_a, pt.r_b);
            }
        }
    }

    fn apply_restitution(&mut self, pairs: &mut [PairConstraint]) {
        let threshold = self.config.restitution_threshold;
        for pc in pairs.iter_mut() {
            if pc.restitution == 0.0 {
                continue;
            }
            for k in 0..pc.count {
                let pt = pc.points[k];
                if pt.approach_speed > -threshold || pt.max_normal_impulse == 0.0 {
                    continue;
                }
                let vn = self.relative_velocity(pc, &pt).dot(pc.normal);
                let new_impulse =
                    (pt.normal_impulse - pt.normal_mass * (vn + pc.restitution * pt.approach_speed)).max(0.0);
                let delta = new_impulse - pt.normal_impulse;
                pc.points[k].normal_impulse = new_impulse;
                self.apply_pair_impulse(pc.a, pc.b, pc.normal * delta, pt.r_a, pt.r_b);
            }
        }
    }

    fn store_impulses(&mut self, pairs: &[PairConstraint]) {
        self.cache.clear();
        self.rolling_cache.clear();
        for pc in pairs {
            let ia = self.bodies[pc.a].id;
            let ib = self.bodies[pc.b].id;
            for pt in &pc.points[..pc.count] {
                self.cache
                    .insert((ia, ib, pt.id), CachedImpulse { normal: pt.normal_impulse, tangent: pt.tangent_impulse });
            }
            if pc.rolling_impulse != 0.0 {
                self.rolling_cache.insert((ia, ib), pc.rolling_impulse);
            }
        }
    }

    fn solve_positions(&mut self, pairs: &[PairConstraint]) {
        let c = self.config;
        for pc in pairs {
            for pt in &pc.points[..pc.count] {
                let (ba, bb) = pair_mut(&mut self.bodies, pc.a, pc.b);
                let xa = ba.transform();
                let xb = bb.transform();
                let normal = xa.q.apply(pc.local_normal);
                let pa = xa.apply(pt.local_a);
                let pb = xb.apply(pt.local_b);
                let separation = (pb - pa).dot(normal);
                let correction = (c.baumgarte * (separation + c.linear_slop)).clamp(-c.max_correction, 0.0);
                if correction == 0.0 {
                    continue;
                }
                let mid = (pa + pb) * 0.5;
                let r_a = mid - ba.position;
                let r_b = mid - bb.position;
                let rn_a = r_a.cross(normal);
                let rn_b = r_b.cross(normal);
                let k = ba.inv_mass + bb.inv_mass + ba.inv_inertia * rn_a * rn_a + bb.inv_inertia * rn_b * rn_b;
                if k <= 0.0 {
                    continue;
                }
                let p = normal * (-correction / k);
                if ba.dynamic {
                    ba.position -= p * ba.inv_mass;
                    ba.rotation -= ba.inv_inertia * r_a.cross(p);
                }
                if bb.dynamic {
                    bb.position += p * bb.inv_mass;
                    bb.rotation += bb.inv_inertia * r_b.cross(p);
                }
            }
        }
    }

    fn collect_contacts(&self, pairs: &[PairConstraint]) -> Vec<Contact> {
        let mut out = Vec::with_capacity(pairs.len());
        for pc in pairs {
            let pts = &pc.points[..pc.count];
            let impulse: f64 = pts.iter().map(|p| p.normal_impulse).sum();
            let a = &self.bodies[pc.a];
            let b = &self.bodies[pc.b];
            let point = if impulse > 0.0 {
                pts.iter().fold(Vec2::ZERO, |acc, p| acc + (a.position + p.r_a) * p.normal_impulse) / impulse
            } else {
                pts.iter().fold(Vec2::ZERO, |acc, p| acc + a.position + p.r_a) / pc.count as f64
            };
            out.push(Contact { body_a: a.id, body_b: b.id, point, normal: pc.normal, impulse });
        }
        out
    }
}

fn pair_mut(bodies: &mut [Body], a: usize, b: usize) -> (&mut Body, &mut Body) {
    debug_assert!(a < b);
    let (lo, hi) = bodies.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Counts consecutive calm ticks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SettleTracker {
    pub calm_ticks: u32,
}

impl SettleTracker {
    pub fn observe(&mut self, world: &World) {
        if world.is_calm() {
            self.calm_ticks = self.calm_ticks.saturating_add(1);
        } else {
            self.calm_ticks = 0;
        }
    }

    pub fn reset(&mut self) {
        self.calm_ticks = 0;
    }
}

/// A world is settled when it has no dynamic bodies, or when every dynamic
/// body has stayed below the speed thresholds for the configured number of
/// consecutive ticks.
pub fn is_settled(world: &World, history: &SettleTracker) -> bool {
    !world.bodies().iter().any(|b| b.dynamic) || history.calm_ticks >= world.config().settle_ticks
}
