//! Game rules layered over the physics world: levels, the slingshot, bird
//! powers and the episode lifecycle.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{BirdType, ObjectClass, Power};
use crate::math::{Aabb, Vec2};
use crate::physics::{
    is_settled, Body, BodyId, KinematicPath, Material, MaterialKind, PhysicsConfig, SettleTracker, Shape, World,
};

/// Launch speed at full stretch, units per second.
pub const V_MAX: f64 = 30.0;
/// Drag distance that yields `V_MAX`.
pub const MAX_STRETCH: f64 = 2.0;
/// Speed multiplier of the yellow bird's power.
pub const ACCEL_FACTOR: f64 = 1.8;
/// Angular offset of the outer blue birds, radians.
pub const SPLIT_ANGLE: f64 = 12.0 * core::f64::consts::PI / 180.0;
pub const BLAST_RADIUS: f64 = 5.0;
/// Radial impulse at the blast centre; decays linearly to zero at the radius.
pub const BLAST_IMPULSE: f64 = 30.0;
/// Direct health loss at the blast centre; decays like the impulse.
pub const BLAST_DAMAGE: f64 = 60.0;
/// Simulated seconds after which a shot is cut off even if still moving.
pub const SHOT_TIMEOUT: f64 = 30.0;
pub const LEVEL_WIDTH: f64 = 84.0;
pub const LEVEL_HEIGHT: f64 = 48.0;
pub const EGG_RADIUS: f64 = 0.3;
pub const EGG_SPEED: f64 = 20.0;
/// Upward speed the white bird receives after laying its egg.
pub const WHITE_POP_SPEED: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("no birds left in the queue")]
    NoBirdsLeft,
    #[error("the episode is over")]
    EpisodeOver,
    #[error("release offset has zero length")]
    ZeroStretch,
    #[error("power already used")]
    PowerAlreadyUsed,
    #[error("bird has no power")]
    NoPower,
    #[error("bird is not in flight")]
    NotInFlight,
    #[error("invalid level: {0}")]
    InvalidLevel(&'static str),
}

/// Default level rectangle, origin at the bottom-left corner.
pub fn default_bounds() -> Aabb {
    Aabb::new(Vec2::ZERO, Vec2::new(LEVEL_WIDTH, LEVEL_HEIGHT))
}

/// Physics settings used for every episode played in `bounds`.
pub fn physics_config(bounds: &Aabb) -> PhysicsConfig {
    PhysicsConfig {
        kill_bounds: Some(Aabb::new(bounds.min - Vec2::new(10.0, 10.0), bounds.max + Vec2::new(10.0, 200.0))),
        ..PhysicsConfig::default()
    }
}

/// Drag offset to launch velocity. The bird leaves opposite to the drag with
/// speed proportional to the stretch, clamped at `V_MAX`.
pub fn release_to_velocity(release: Vec2) -> Result<Vec2, GameError> {
    let stretch = release.length();
    if !(stretch >= 1e-9) {
        return Err(GameError::ZeroStretch);
    }
    let speed = V_MAX * (stretch / MAX_STRETCH).min(1.0);
    Ok(release * (-speed / stretch))
}

/// Inverse of `release_to_velocity` for speeds up to `V_MAX`.
pub fn velocity_to_release(velocity: Vec2) -> Vec2 {
    let speed = velocity.length();
    if speed == 0.0 {
        return Vec2::ZERO;
    }
    velocity * (-(speed.min(V_MAX) / V_MAX) * MAX_STRETCH / speed)
}

/// A shot: where the bird is released and when its power fires.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Drag point relative to the slingshot anchor.
    pub release: Vec2,
    /// Fraction of the planned arc length at which the power activates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap_fraction: Option<f64>,
}

impl Action {
    pub fn new(release: Vec2) -> Action {
        Action { release, tap_fraction: None }
    }

    pub fn with_tap(release: Vec2, tap_fraction: f64) -> Action {
        Action { release, tap_fraction: Some(tap_fraction) }
    }
}

/// One body of a level description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelBody {
    pub shape: Shape,
    pub material: MaterialKind,
    pub position: Vec2,
    pub rotation: f64,
    #[serde(default = "one")]
    pub health_multiplier: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<KinematicPath>,
}

fn one() -> f64 {
    1.0
}

impl LevelBody {
    pub fn new(shape: Shape, material: MaterialKind, position: Vec2) -> LevelBody {
        LevelBody { shape, material, position, rotation: 0.0, health_multiplier: 1.0, path: None }
    }

    pub fn platform(shape: Shape, position: Vec2) -> LevelBody {
        LevelBody::new(shape, MaterialKind::Platform, position)
    }

    pub fn rotated(mut self, rotation: f64) -> LevelBody {
        self.rotation = rotation;
        self
    }

    pub fn with_health(mut self, multiplier: f64) -> LevelBody {
        self.health_multiplier = multiplier;
        self
    }

    pub fn with_path(mut self, path: KinematicPath) -> LevelBody {
        self.position = path.position_at(0.0);
        self.path = Some(path);
        self
    }

    pub fn class(&self) -> ObjectClass {
        match self.material {
            MaterialKind::Wood => ObjectClass::Wood,
            MaterialKind::Ice => ObjectClass::Ice,
            MaterialKind::Stone => ObjectClass::Stone,
            MaterialKind::Pig => ObjectClass::Pig,
            MaterialKind::Platform => ObjectClass::Platform,
            MaterialKind::Bird => ObjectClass::RedBird,
        }
    }

    pub fn to_body(&self) -> Body {
        let body = if self.material == MaterialKind::Platform {
            Body::fixed(self.shape, self.position, self.rotation)
        } else {
            Body::dynamic(self.shape, Material::of(self.material), self.class(), self.position, self.rotation)
                .with_health_multiplier(self.health_multiplier)
        };
        match self.path {
            Some(p) if !body.dynamic => body.with_path(p),
            _ => body,
        }
    }
}

/// A playable level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub slingshot_anchor: Vec2,
    pub bird_queue: Vec<BirdType>,
    pub bodies: Vec<LevelBody>,
    pub bounds: Aabb,
}

impl Level {
    pub fn pig_count(&self) -> usize {
        self.bodies.iter().filter(|b| b.material == MaterialKind::Pig).count()
    }

    /// Structural checks that need no simulation.
    pub fn validate(&self) -> Result<(), GameError> {
        if self.pig_count() == 0 {
            return Err(GameError::InvalidLevel("level has no pig"));
        }
        if self.bird_queue.is_empty() {
            return Err(GameError::InvalidLevel("level has no bird"));
        }
        for b in &self.bodies {
            if b.shape.validate().is_err() {
                return Err(GameError::InvalidLevel("degenerate shape"));
            }
            if b.material == MaterialKind::Bird {
                return Err(GameError::InvalidLevel("birds belong in the queue"));
            }
            if !(b.health_multiplier > 0.0) {
                return Err(GameError::InvalidLevel("health multiplier must be positive"));
            }
            let xf = crate::math::Transform::new(b.position, b.rotation);
            if !self.bounds.contains_aabb(&b.shape.aabb(&xf)) {
                return Err(GameError::InvalidLevel("body outside bounds"));
            }
        }
        if !self.bounds.contains(self.slingshot_anchor) {
            return Err(GameError::InvalidLevel("slingshot outside bounds"));
        }
        Ok(())
    }

    /// Fresh physics world holding the slingshot followed by the level bodies
    /// in declaration order.
    pub fn build_world(&self) -> World {
        let mut world = World::new(physics_config(&self.bounds), 0);
        world.add(slingshot_body(self.slingshot_anchor));
        for b in &self.bodies {
            world.add(b.to_body());
        }
        world
    }

    /// True when the level stays at rest: after `settle_ticks` plus one ticks
    /// nothing was destroyed and every dynamic body is below the settle
    /// thresholds throughout.
    pub fn is_stable(&self) -> bool {
        let mut world = self.build_world();
        let mut tracker = SettleTracker::default();
        let count = world.bodies().len();
        for _ in 0..=world.config().settle_ticks {
            world.step();
            tracker.observe(&world);
            if world.bodies().len() != count {
                return false;
            }
        }
        is_settled(&world, &tracker)
    }
}

fn slingshot_body(anchor: Vec2) -> Body {
    let mut s = Body::fixed(Shape::Box { half_w: 0.25, half_h: 1.5 }, anchor - Vec2::new(0.0, 1.9), 0.0).as_sensor();
    s.class = ObjectClass::Slingshot;
    s
}

/// Bird spawned by a launch or a split, tracked while the shot lasts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BirdInFlight {
    pub id: BodyId,
    pub kind: BirdType,
    pub power_used: bool,
    /// Set after the first contact; closes the activation window.
    pub contacted: bool,
    /// Explodes on its next contact (tapped black bird or white bird's egg).
    pub fused: bool,
}

impl BirdInFlight {
    fn new(id: BodyId, kind: BirdType) -> BirdInFlight {
        BirdInFlight { id, kind, power_used: false, contacted: false, fused: false }
    }
}

/// Fires the bird's power. Returns the projectiles spawned by it (split
/// birds or the egg), already inserted into `world`.
pub fn activate_power(world: &mut World, bird: &mut BirdInFlight) -> Result<Vec<BirdInFlight>, GameError> {
    if bird.kind.power() == Power::None {
        return Err(GameError::NoPower);
    }
    if bird.power_used {
        return Err(GameError::PowerAlreadyUsed);
    }
    if bird.contacted {
        return Err(GameError::NotInFlight);
    }
    let template = world.body(bird.id).ok_or(GameError::NotInFlight)?.clone();
    bird.power_used = true;
    let v = template.linear_velocity;
    let mut spawned = Vec::new();
    match bird.kind.power() {
        Power::None => unreachable!(),
        Power::Accelerate => {
            if let Some(b) = world.body_mut(bird.id) {
                b.linear_velocity = v * ACCEL_FACTOR;
            }
        }
        Power::Split3 => {
            for angle in [-SPLIT_ANGLE, SPLIT_ANGLE] {
                let mut twin = template.clone();
                twin.linear_velocity = v.rotate(angle);
                let id = world.add(twin);
                spawned.push(BirdInFlight { power_used: true, ..BirdInFlight::new(id, bird.kind) });
            }
        }
        Power::DropEgg => {
            let mut egg = Body::dynamic(
                Shape::Circle { radius: EGG_RADIUS },
                Material::of(MaterialKind::Bird),
                ObjectClass::Tnt,
                template.position,
                0.0,
            );
            egg.group = template.group;
            egg.linear_velocity = Vec2::new(0.0, -EGG_SPEED);
            let id = world.add(egg);
            spawned.push(BirdInFlight { power_used: true, fused: true, ..BirdInFlight::new(id, bird.kind) });
            if let Some(b) = world.body_mut(bird.id) {
                b.linear_velocity = Vec2::new(v.x, WHITE_POP_SPEED);
            }
        }
        Power::Explode => bird.fused = true,
    }
    Ok(spawned)
}

/// Detonates the body `id`: blast around its position, then removal of the
/// bomb and of everything the blast destroyed.
pub fn explode(world: &mut World, id: BodyId) -> Vec<BodyId> {
    let Some(center) = world.body(id).map(|b| b.position) else {
        return Vec::new();
    };
    world.apply_blast(center, BLAST_RADIUS, BLAST_IMPULSE, BLAST_DAMAGE, &[id]);
    if let Some(b) = world.body_mut(id) {
        b.health = 0.0;
    }
    world.remove_dead()
}

/// Length of the ballistic path from `start` with velocity `v` until it
/// drops below the floor of `bounds` or leaves it sideways.
pub fn planned_arc_length(start: Vec2, v: Vec2, gravity: Vec2, bounds: &Aabb, dt: f64) -> f64 {
    let mut length = 0.0;
    let mut prev = start;
    let max_steps = (SHOT_TIMEOUT / dt) as usize;
    for n in 1..=max_steps {
        let t = n as f64 * dt;
        let p = start + v * t + gravity * (0.5 * t * t);
        length += p.distance(prev);
        prev = p;
        if p.y < bounds.min.y || p.x < bounds.min.x || p.x > bounds.max.x {
            break;
        }
    }
    length
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeResult {
    Ongoing,
    Passed,
    Failed,
}

/// What happened during one shot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub action: Action,
    pub bird: BirdType,
    pub ticks: u64,
    pub contacts: u32,
    pub max_impulse: f64,
    pub destroyed: Vec<BodyId>,
    pub pigs_destroyed: u32,
    pub power_used: bool,
    pub timed_out: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub passed: bool,
    pub birds_used: u32,
    pub pigs_destroyed: u32,
    pub shot_log: Vec<ShotRecord>,
}

/// A level being played.
#[derive(Clone, Debug)]
pub struct Episode {
    world: World,
    anchor: Vec2,
    bounds: Aabb,
    queue: VecDeque<BirdType>,
    initial_pigs: u32,
    outcome: EpisodeOutcome,
    next_group: u32,
}

impl Episode {
    pub fn new(level: &Level) -> Result<Episode, GameError> {
        level.validate()?;
        Ok(Episode {
            world: level.build_world(),
            anchor: level.slingshot_anchor,
            bounds: level.bounds,
            queue: level.bird_queue.iter().copied().collect(),
            initial_pigs: level.pig_count() as u32,
            outcome: EpisodeOutcome::default(),
            next_group: 1,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn anchor(&self) -> Vec2 {
        self.anchor
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn birds_left(&self) -> usize {
        self.queue.len()
    }

    pub fn bird_queue(&self) -> impl Iterator<Item = BirdType> + '_ {
        self.queue.iter().copied()
    }

    pub fn next_bird(&self) -> Option<BirdType> {
        self.queue.front().copied()
    }

    pub fn pigs_left(&self) -> u32 {
        self.world.bodies().iter().filter(|b| b.class == ObjectClass::Pig).count() as u32
    }

    pub fn outcome(&self) -> &EpisodeOutcome {
        &self.outcome
    }

    /// Passed once no pig remains; failed once pigs remain after the last
    /// bird's shot has come to rest (or timed out).
    pub fn result(&self) -> EpisodeResult {
        if self.pigs_left() == 0 {
            EpisodeResult::Passed
        } else if self.queue.is_empty() {
            EpisodeResult::Failed
        } else {
            EpisodeResult::Ongoing
        }
    }

    pub fn launch(&mut self, action: Action) -> Result<&ShotRecord, GameError> {
        self.launch_observed(action, |_| {})
    }

    /// Plays one shot, calling `observe` after every tick.
    pub fn launch_observed(
        &mut self,
        action: Action,
        mut observe: impl FnMut(&World),
    ) -> Result<&ShotRecord, GameError> {
        if self.result() != EpisodeResult::Ongoing {
            return Err(GameError::EpisodeOver);
        }
        let kind = self.next_bird().ok_or(GameError::NoBirdsLeft)?;
        let velocity = release_to_velocity(action.release)?;
        if action.tap_fraction.is_some() && !kind.has_power() {
            return Err(GameError::NoPower);
        }
        self.queue.pop_front();
        let pigs_before = self.pigs_left();

        let dt = self.world.dt();
        let gravity = self.world.gravity();
        let mut bird = Body::dynamic(
            Shape::Circle { radius: kind.radius() },
            Material::of(MaterialKind::Bird),
            kind.class(),
            self.anchor,
            0.0,
        );
        // Half-step pre-kick: semi-implicit Euler then samples the exact parabola.
        bird.linear_velocity = velocity - gravity * (0.5 * dt);
        bird.group = self.next_group;
        self.next_group += 1;
        let bird_id = self.world.add(bird);
        let tap_at = action
            .tap_fraction
            .map(|f| f.clamp(0.0, 1.0) * planned_arc_length(self.anchor, velocity, gravity, &self.bounds, dt));

        let mut flights = alloc::vec![BirdInFlight::new(bird_id, kind)];
        let mut record = ShotRecord {
            action,
            bird: kind,
            ticks: 0,
            contacts: 0,
            max_impulse: 0.0,
            destroyed: Vec::new(),
            pigs_destroyed: 0,
            power_used: false,
            timed_out: false,
        };
        let mut traveled = 0.0;
        let mut last_pos = self.anchor;
        let mut tracker = SettleTracker::default();
        let max_ticks = (SHOT_TIMEOUT / dt) as u64;

        loop {
            let contacts = self.world.step();
            record.ticks += 1;
            record.destroyed.extend_from_slice(self.world.removed_last_tick());

            let mut detonate = Vec::new();
            for c in contacts.iter().filter(|c| c.impulse > 0.0) {
                record.contacts += 1;
                record.max_impulse = record.max_impulse.max(c.impulse);
                for f in flights.iter_mut() {
                    if (c.body_a == f.id || c.body_b == f.id) && !f.contacted {
                        f.contacted = true;
                        if f.fused {
                            detonate.push(f.id);
                        }
                    }
                }
            }
            for id in detonate {
                record.destroyed.extend(explode(&mut self.world, id));
            }

            if let Some(at) = tap_at {
                if let Some(pos) = self.world.body(bird_id).map(|b| b.position) {
                    traveled += pos.distance(last_pos);
                    last_pos = pos;
                    let main = &mut flights[0];
                    if !main.power_used && !main.contacted && traveled >= at {
                        let spawned = activate_power(&mut self.world, main)?;
                        record.power_used = true;
                        flights.extend(spawned);
                    }
                }
            }

            observe(&self.world);
            tracker.observe(&self.world);
            if is_settled(&self.world, &tracker) {
                break;
            }
            if record.ticks >= max_ticks {
                record.timed_out = true;
                break;
            }
        }

        for f in &flights {
            self.world.remove(f.id);
        }
        record.destroyed.retain(|id| !flights.iter().any(|f| f.id == *id));
        record.pigs_destroyed = pigs_before - self.pigs_left();
        self.outcome.birds_used += 1;
        self.outcome.pigs_destroyed = self.initial_pigs - self.pigs_left();
        self.outcome.passed = self.pigs_left() == 0;
        self.outcome.shot_log.push(record);
        Ok(self.outcome.shot_log.last().expect("just pushed"))
    }
}

/// Plays `actions` in order on a fresh episode until it ends.
pub fn replay(level: &Level, actions: &[Action]) -> Result<EpisodeOutcome, GameError> {
    let mut ep = Episode::new(level)?;
    for a in actions {
        if ep.result() != EpisodeResult::Ongoing {
            break;
        }
        ep.launch(*a)?;
    }
    Ok(ep.outcome().clone())
}
