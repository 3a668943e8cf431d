//! The shipped catalog: two templates per scenario plus two extra
//! manoeuvring templates so that every bird power is covered.

use alloc::vec;
use alloc::vec::Vec;

use super::{range, DistractorPolicy, ParamRange, Params, ScenarioId, TaskTemplate};
use crate::catalog::{BirdType, PigSize};
use crate::game::{default_bounds, planned_arc_length, replay, Action, Level, LevelBody, SPLIT_ANGLE, V_MAX};
use crate::math::Vec2;
use crate::physics::{KinematicPath, MaterialKind, Shape};
use crate::trajectory::{aim_points, point_at, solve_release, ArcKind, ArcSolution};

const G: Vec2 = Vec2::new(0.0, -9.8);
const DT: f64 = 1.0 / 60.0;
const ANCHOR: Vec2 = Vec2::new(6.0, 5.0);
/// Top of the ground platform.
const FLOOR: f64 = 1.0;
const RED_R: f64 = 0.45;

const BLOCKS: &[MaterialKind] = &[MaterialKind::Wood, MaterialKind::Ice, MaterialKind::Stone];
const DISTRACT: DistractorPolicy =
    DistractorPolicy { materials: BLOCKS, x_range: (12.0, 20.0), max: super::MAX_DISTRACTORS };

use crate::physics::MaterialKind::{Ice, Stone, Wood};

// ---------------------------------------------------------------------------
// Layout helpers

struct Layout {
    bodies: Vec<LevelBody>,
}

impl Layout {
    fn new() -> Layout {
        let ground = LevelBody::platform(Shape::Box { half_w: 42.0, half_h: 0.5 }, Vec2::new(42.0, FLOOR - 0.5));
        Layout { bodies: vec![ground] }
    }

    fn push(&mut self, b: LevelBody) -> usize {
        self.bodies.push(b);
        self.bodies.len() - 1
    }

    /// Static rectangle spanning `[x0, x1] x [y0, y1]`.
    fn platform(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> usize {
        let shape = Shape::Box { half_w: 0.5 * (x1 - x0), half_h: 0.5 * (y1 - y0) };
        self.push(LevelBody::platform(shape, Vec2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))))
    }

    fn wedge(&mut self, material: MaterialKind, vertices: [Vec2; 3]) -> usize {
        let (shape, c) = Shape::triangle(vertices).expect("wedge vertices are not collinear");
        self.push(LevelBody::new(shape, material, c))
    }

    /// Block standing with its bottom edge at `bottom`.
    fn block(&mut self, material: MaterialKind, cx: f64, bottom: f64, hw: f64, hh: f64) -> usize {
        self.push(LevelBody::new(Shape::Box { half_w: hw, half_h: hh }, material, Vec2::new(cx, bottom + hh)))
    }

    fn ball(&mut self, material: MaterialKind, cx: f64, bottom: f64, r: f64) -> usize {
        self.push(LevelBody::new(Shape::Circle { radius: r }, material, Vec2::new(cx, bottom + r)))
    }

    fn pig(&mut self, size: PigSize, cx: f64, bottom: f64) -> usize {
        let r = size.radius();
        self.push(
            LevelBody::new(Shape::Circle { radius: r }, MaterialKind::Pig, Vec2::new(cx, bottom + r))
                .with_health(size.health_multiplier()),
        )
    }

    fn gate(&mut self, hw: f64, hh: f64, path: KinematicPath) -> usize {
        self.push(LevelBody::platform(Shape::Box { half_w: hw, half_h: hh }, path.base).with_path(path))
    }

    fn finish(self, birds: &[BirdType]) -> Level {
        Level { slingshot_anchor: ANCHOR, bird_queue: birds.to_vec(), bodies: self.bodies, bounds: default_bounds() }
    }
}

/// A pillar of width `top_w` and height `h` starting at `x0`, then a slot of
/// width `slot_w` closed by a wall. A roof `roof_gap` above the pillar top
/// reaches back to `x0 + roof_from`, so only things leaving the pillar
/// sideways can drop in. Returns the pillar top and the slot centre.
fn slot_unit(l: &mut Layout, x0: f64, h: f64, top_w: f64, slot_w: f64, roof_gap: f64, roof_from: f64) -> (f64, f64) {
    let top = FLOOR + h;
    l.platform(x0, FLOOR, x0 + top_w, top);
    let wx = x0 + top_w + slot_w;
    l.platform(wx, FLOOR, wx + 0.8, top + roof_gap);
    l.platform(x0 + roof_from, top + roof_gap, wx + 0.8, top + roof_gap + 0.5);
    (top, x0 + top_w + 0.5 * slot_w)
}

/// Roofed tunnel on a floor at height `y`, mouth at `mouth`, ending against a
/// backstop. Returns the x of the pig slot at its far end.
fn tunnel(l: &mut Layout, mouth: f64, y: f64, length: f64, clearance: f64) -> f64 {
    l.platform(mouth, y + clearance, mouth + length + 0.5, y + clearance + 0.5);
    l.platform(mouth + length, y, mouth + length + 0.5, y + clearance);
    mouth + length - 0.6
}

// ---------------------------------------------------------------------------
// Shot helpers

fn arc_to(level: &Level, target: Vec2, kind: ArcKind, speed: f64) -> Option<ArcSolution> {
    solve_release(level.slingshot_anchor, target, speed, G, &level.bounds, DT).ok()?.into_iter().find(|a| a.arc == kind)
}

fn at_point(level: &Level, target: Vec2, kind: ArcKind) -> Option<Action> {
    arc_to(level, target, kind, V_MAX).map(|a| Action::new(a.release))
}

/// Full-speed shot at a body's centroid, falling back to its top.
fn at_body(level: &Level, index: usize, kind: ArcKind) -> Option<Action> {
    let body = level.bodies.get(index)?.to_body();
    aim_points(&body, 0.0).into_iter().find_map(|p| at_point(level, p, kind))
}

/// Tap fraction that fires the power on the first tick at which the bird
/// has passed `x`.
fn tap_at_x(level: &Level, arc: &ArcSolution, x: f64) -> Option<f64> {
    let v = arc.velocity();
    let total = planned_arc_length(level.slingshot_anchor, v, G, &level.bounds, DT);
    let mut length = 0.0;
    let mut prev = level.slingshot_anchor;
    for n in 1..(30.0 / DT) as usize {
        let p = point_at(level.slingshot_anchor, v, G, n as f64 * DT);
        length += p.distance(prev);
        prev = p;
        if p.x >= x {
            return Some(((length - 1e-7) / total).clamp(0.0, 1.0));
        }
    }
    None
}

/// Position and velocity of the bird on the tick its power fires.
fn state_at_fraction(level: &Level, v: Vec2, fraction: f64) -> (Vec2, Vec2) {
    let at = fraction * planned_arc_length(level.slingshot_anchor, v, G, &level.bounds, DT);
    let mut length = 0.0;
    let mut prev = level.slingshot_anchor;
    let mut n = 1;
    loop {
        let t = n as f64 * DT;
        let p = point_at(level.slingshot_anchor, v, G, t);
        length += p.distance(prev);
        prev = p;
        if length >= at || n > 3600 {
            return (p, v + G * t);
        }
        n += 1;
    }
}

fn sequence(shots: &[Option<Action>]) -> Vec<Action> {
    shots.iter().copied().collect::<Option<Vec<_>>>().unwrap_or_default()
}

/// First candidate sequence that clears the level, or the first candidate.
fn first_passing(level: &Level, candidates: Vec<Vec<Action>>) -> Vec<Action> {
    let mut candidates: Vec<Vec<Action>> = candidates.into_iter().filter(|c| !c.is_empty()).collect();
    if candidates.len() <= 1 {
        return candidates.pop().unwrap_or_default();
    }
    for c in &candidates {
        if replay(level, c).map(|o| o.passed).unwrap_or(false) {
            return c.clone();
        }
    }
    candidates.swap_remove(0)
}

/// Low shots that touch the ground just before a tunnel mouth so the bird
/// skids inside.
fn skim_candidates(level: &Level, mouth: f64, floor: f64) -> Vec<Option<Action>> {
    [2.0, 3.0, 1.5, 4.0, 5.0, 1.0]
        .iter()
        .map(|k| at_point(level, Vec2::new(mouth - k, floor + RED_R), ArcKind::Low))
        .collect()
}

fn pig_index(level: &Level, nth: usize) -> usize {
    level
        .bodies
        .iter()
        .enumerate()
        .filter(|(_, b)| b.material == MaterialKind::Pig)
        .nth(nth)
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn index_of(level: &Level, material: MaterialKind, nth: usize) -> usize {
    level.bodies.iter().enumerate().filter(|(_, b)| b.material == material).nth(nth).map(|(i, _)| i).unwrap_or(0)
}

// ---------------------------------------------------------------------------
// 1 single force

const R1_1: &[ParamRange] = &[range("x", 22.0, 70.0), range("h", 1.5, 5.0)];

fn build_1_1(p: &Params) -> Level {
    let (x, h) = (p.get("x"), p.get("h"));
    let mut l = Layout::new();
    l.platform(x - 1.2, FLOOR, x + 1.2, FLOOR + h);
    l.pig(PigSize::Small, x, FLOOR + h);
    l.finish(&[BirdType::Red])
}

fn rule_1_1(_: &Params, level: &Level) -> Vec<Action> {
    sequence(&[at_body(level, pig_index(level, 0), ArcKind::Low)])
}

const R1_2: &[ParamRange] = &[range("x", 38.0, 70.0), range("h", 3.0, 8.0), range("d", 2.5, 4.0)];

fn build_1_2(p: &Params) -> Level {
    let (x, h, d) = (p.get("x"), p.get("h"), p.get("d"));
    let mut l = Layout::new();
    l.platform(x - 1.2, FLOOR, x + 1.2, FLOOR + h);
    l.pig(PigSize::Small, x, FLOOR + h);
    l.platform(x - d - 0.4, FLOOR, x - d + 0.4, FLOOR + h + 3.5);
    l.finish(&[BirdType::Red])
}

fn rule_high_at_pig(_: &Params, level: &Level) -> Vec<Action> {
    sequence(&[at_body(level, pig_index(level, 0), ArcKind::High)])
}

// ---------------------------------------------------------------------------
// 2 multiple forces

const R2_1: &[ParamRange] = &[range("x", 22.0, 60.0), range("h", 1.5, 4.0)];

fn build_2_1(p: &Params) -> Level {
    let (x, h) = (p.get("x"), p.get("h"));
    let top = FLOOR + h;
    let mut l = Layout::new();
    l.platform(x - 1.5, FLOOR, x + 1.5, top);
    l.platform(x + 1.2, top, x + 1.5, top + 0.6);
    l.pig(PigSize::Large, x, top);
    l.finish(&[BirdType::Red; 3])
}

fn rule_2_1(_: &Params, level: &Level) -> Vec<Action> {
    let shot = at_body(level, pig_index(level, 0), ArcKind::Low);
    sequence(&[shot, shot, shot])
}

const R2_2: &[ParamRange] = &[range("x", 38.0, 65.0), range("h", 3.0, 7.0), range("d", 2.8, 4.0)];

fn build_2_2(p: &Params) -> Level {
    let (x, h, d) = (p.get("x"), p.get("h"), p.get("d"));
    let top = FLOOR + h;
    let mut l = Layout::new();
    l.platform(x - 1.5, FLOOR, x + 1.5, top);
    l.platform(x - 1.5, top, x - 1.2, top + 0.6);
    l.platform(x + 1.2, top, x + 1.5, top + 0.6);
    l.pig(PigSize::Large, x, top);
    l.platform(x - d - 0.4, FLOOR, x - d + 0.4, top + 4.0);
    l.finish(&[BirdType::Red; 3])
}

fn rule_2_2(_: &Params, level: &Level) -> Vec<Action> {
    let shot = at_body(level, pig_index(level, 0), ArcKind::High);
    sequence(&[shot, shot, shot])
}

// ---------------------------------------------------------------------------
// 3 rolling and 5 sliding: an object on a shelf pushed into a roofed tunnel

const R_SHELF: &[ParamRange] =
    &[range("h", 1.5, 4.5), range("x0", 28.0, 40.0), range("lead", 3.0, 5.0), range("len", 5.0, 8.0)];
const R_SLIDE: &[ParamRange] =
    &[range("h", 1.5, 4.5), range("x0", 28.0, 40.0), range("lead", 3.0, 5.0), range("len", 4.0, 6.0)];

fn shelf_tunnel(p: &Params, gap: f64, pusher: impl FnOnce(&mut Layout, f64, f64)) -> Level {
    let (h, x0, lead, len) = (p.get("h"), p.get("x0"), p.get("lead"), p.get("len"));
    let y = FLOOR + h;
    let mouth = x0 + lead + gap;
    let mut l = Layout::new();
    l.platform(x0, FLOOR, mouth + len + 0.5, y);
    pusher(&mut l, x0 + lead, y);
    let px = tunnel(&mut l, mouth, y, len, 2.0);
    l.pig(PigSize::Small, px, y);
    l.finish(&[BirdType::Red])
}

fn build_3_1(p: &Params) -> Level {
    shelf_tunnel(p, 2.5, |l, x, y| {
        l.ball(Stone, x, y, 0.8);
    })
}

fn build_5_1(p: &Params) -> Level {
    shelf_tunnel(p, 1.2, |l, x, y| {
        l.block(Wood, x, y, 0.6, 0.6);
    })
}

const R_RAMP: &[ParamRange] =
    &[range("h", 5.0, 8.0), range("x0", 24.0, 32.0), range("ramp", 4.0, 6.0), range("len", 4.0, 6.0)];

fn ramp_tunnel(p: &Params, pusher: impl FnOnce(&mut Layout, f64, f64)) -> Level {
    let (h, x0, ramp, len) = (p.get("h"), p.get("x0"), p.get("ramp"), p.get("len"));
    let top = FLOOR + h;
    let mut l = Layout::new();
    l.platform(x0, FLOOR, x0 + 3.0, top);
    pusher(&mut l, x0 + 1.4, top);
    let foot = x0 + 3.0 + ramp;
    l.wedge(MaterialKind::Platform, [Vec2::new(x0 + 3.0, FLOOR), Vec2::new(foot, FLOOR), Vec2::new(x0 + 3.0, top)]);
    let px = tunnel(&mut l, foot + 0.8, FLOOR, len, 2.4);
    l.pig(PigSize::Small, px, FLOOR);
    l.finish(&[BirdType::Red])
}

fn build_3_2(p: &Params) -> Level {
    ramp_tunnel(p, |l, x, y| {
        l.ball(Stone, x, y, 1.0);
    })
}

fn build_5_2(p: &Params) -> Level {
    ramp_tunnel(p, |l, x, y| {
        l.block(Stone, x, y, 0.8, 0.8);
    })
}

/// Low shot at the first non-pig dynamic body.
fn rule_push_first(_: &Params, level: &Level) -> Vec<Action> {
    let i = level
        .bodies
        .iter()
        .position(|b| !matches!(b.material, MaterialKind::Pig | MaterialKind::Platform))
        .unwrap_or(0);
    let shots = [at_body(level, i, ArcKind::Low), at_body(level, i, ArcKind::High)];
    first_passing(level, shots.iter().map(|s| sequence(&[*s])).collect())
}

// ---------------------------------------------------------------------------
// 4 falling: an object on a pillar pushed into a narrow slot

const R4_1: &[ParamRange] = &[range("h", 6.0, 9.0), range("x0", 30.0, 55.0)];
const R4_2: &[ParamRange] = &[range("h", 6.0, 9.0), range("x0", 34.0, 58.0)];

fn build_4_1(p: &Params) -> Level {
    let mut l = Layout::new();
    let (top, slot) = slot_unit(&mut l, p.get("x0"), p.get("h"), 3.0, 2.2, 1.9, 0.8);
    l.ball(Stone, p.get("x0") + 1.6, top, 0.7);
    l.pig(PigSize::Small, slot, FLOOR);
    l.finish(&[BirdType::Red])
}

fn build_4_2(p: &Params) -> Level {
    let mut l = Layout::new();
    let (top, slot) = slot_unit(&mut l, p.get("x0"), p.get("h"), 3.0, 2.2, 1.9, 0.8);
    l.block(Stone, p.get("x0") + 1.8, top, 0.6, 0.6);
    l.pig(PigSize::Small, slot, FLOOR);
    l.finish(&[BirdType::Red])
}

// ---------------------------------------------------------------------------
// 6 bouncing

const R6_1: &[ParamRange] = &[range("mouth", 35.0, 60.0), range("len", 5.0, 8.0)];

fn build_6_1(p: &Params) -> Level {
    let mut l = Layout::new();
    let px = tunnel(&mut l, p.get("mouth"), FLOOR, p.get("len"), 1.8);
    l.pig(PigSize::Small, px, FLOOR);
    l.finish(&[BirdType::Red])
}

fn rule_6_1(p: &Params, level: &Level) -> Vec<Action> {
    let c = skim_candidates(level, p.get("mouth"), FLOOR);
    first_passing(level, c.iter().map(|s| sequence(&[*s])).collect())
}

const R6_2: &[ParamRange] = &[range("x0", 35.0, 60.0), range("h", 2.0, 3.5), range("w", 3.5, 5.0)];

fn build_6_2(p: &Params) -> Level {
    let (x0, h, w) = (p.get("x0"), p.get("h"), p.get("w"));
    let mut l = Layout::new();
    l.platform(x0, FLOOR, x0 + 1.0, FLOOR + h);
    l.platform(x0 + 1.0 + w, FLOOR, x0 + 2.0 + w, FLOOR + h + 7.0);
    l.pig(PigSize::Small, x0 + 1.7, FLOOR);
    l.finish(&[BirdType::Red])
}

/// Shots at the face of the back wall from low to high, on both arcs.
fn rule_6_2(p: &Params, level: &Level) -> Vec<Action> {
    let face = p.get("x0") + 1.0 + p.get("w") - RED_R - 0.05;
    let mut c = Vec::new();
    for kind in [ArcKind::Low, ArcKind::High] {
        for k in 0..12 {
            let y = FLOOR + 0.6 + 0.6 * k as f64;
            c.push(sequence(&[at_point(level, Vec2::new(face, y), kind)]));
        }
    }
    first_passing(level, c)
}

// ---------------------------------------------------------------------------
// 7 relative weight: only the stone block is heavy enough to kill

const R7: &[ParamRange] = &[range("h", 6.0, 8.0), range("x0", 32.0, 55.0)];

fn weight_stack(p: &Params, lower: MaterialKind, upper: MaterialKind) -> Level {
    let x0 = p.get("x0");
    let mut l = Layout::new();
    let (top, _) = slot_unit(&mut l, x0, p.get("h"), 3.0, 2.4, 2.9, 1.8);
    l.block(lower, x0 + 2.2, top, 0.6, 0.6);
    l.block(upper, x0 + 2.2, top + 1.2, 0.6, 0.6);
    l.pig(PigSize::Medium, x0 + 4.2, FLOOR);
    l.finish(&[BirdType::Red])
}

fn build_7_1(p: &Params) -> Level {
    weight_stack(p, Stone, Wood)
}

fn build_7_2(p: &Params) -> Level {
    weight_stack(p, Wood, Stone)
}

fn rule_stone(_: &Params, level: &Level) -> Vec<Action> {
    let i = index_of(level, Stone, 0);
    first_passing(
        level,
        vec![sequence(&[at_body(level, i, ArcKind::Low)]), sequence(&[at_body(level, i, ArcKind::High)])],
    )
}

// ---------------------------------------------------------------------------
// 8 relative height: only a tall enough post reaches the pig when toppled

const R8_1: &[ParamRange] =
    &[range("x", 35.0, 58.0), range("len", 4.5, 6.0), range("reach", 0.55, 0.8), range("decoy", 1.5, 2.2)];

fn build_8_1(p: &Params) -> Level {
    let (x, len, decoy) = (p.get("x"), p.get("len"), p.get("decoy"));
    let d = len * p.get("reach") + 0.5;
    let mut l = Layout::new();
    l.block(Stone, x - 3.0, FLOOR, 0.3, 0.5 * decoy);
    l.platform(x - 1.5, FLOOR, x - 0.9, FLOOR + 0.65 * len);
    l.block(Stone, x, FLOOR, 0.3, 0.5 * len);
    l.pig(PigSize::Small, x + d, FLOOR);
    let roof = FLOOR + len + 0.4;
    l.platform(x + 0.5, roof, x + d + 2.0, roof + 0.5);
    l.platform(x + d + 1.5, FLOOR, x + d + 2.0, roof);
    l.finish(&[BirdType::Red])
}

fn height(shape: &Shape) -> f64 {
    shape.aabb(&crate::math::Transform::new(Vec2::ZERO, 0.0)).height()
}

/// Hits the tallest post near its top.
fn rule_tallest(_: &Params, level: &Level) -> Vec<Action> {
    let tallest = level
        .bodies
        .iter()
        .enumerate()
        .filter(|(_, b)| b.material == Stone)
        .max_by(|a, b| height(&a.1.shape).total_cmp(&height(&b.1.shape)))
        .map(|(i, _)| i);
    let Some(i) = tallest else { return Vec::new() };
    let b = &level.bodies[i];
    let hh = height(&b.shape) * 0.5;
    let c = [0.7, 0.85, 0.55]
        .iter()
        .map(|f| sequence(&[at_point(level, b.position + Vec2::new(0.0, hh * f), ArcKind::Low)]))
        .collect();
    first_passing(level, c)
}

const R8_2: &[ParamRange] =
    &[range("x0", 34.0, 56.0), range("h", 5.0, 7.0), range("tall", 2.6, 3.4), range("short", 0.6, 1.0)];

/// Two posts each carrying a stone block on a pillar over a roofed slot.
/// Only the block on the short post passes under the roof.
fn build_8_2(p: &Params) -> Level {
    let (x0, tall, short) = (p.get("x0"), p.get("tall"), p.get("short"));
    let mut l = Layout::new();
    let (top, slot) = slot_unit(&mut l, x0, p.get("h"), 4.0, 2.4, short + 1.5, 4.3);
    l.block(Wood, x0 + 1.2, top, 0.25, 0.5 * tall);
    l.block(Stone, x0 + 1.2, top + tall, 0.5, 0.5);
    l.block(Wood, x0 + 3.4, top, 0.25, 0.5 * short);
    l.block(Stone, x0 + 3.4, top + short, 0.5, 0.5);
    l.pig(PigSize::Small, slot, FLOOR);
    l.finish(&[BirdType::Red])
}

fn rule_8_2(_: &Params, level: &Level) -> Vec<Action> {
    let block = index_of(level, Stone, 1);
    let post = index_of(level, Wood, 1);
    let c = [(block, ArcKind::High), (post, ArcKind::High), (block, ArcKind::Low)]
        .iter()
        .map(|(i, k)| sequence(&[at_body(level, *i, *k)]))
        .collect();
    first_passing(level, c)
}

// ---------------------------------------------------------------------------
// 9 relative width: only the wide window admits the bird

const R9: &[ParamRange] = &[range("x", 40.0, 62.0), range("px", 2.6, 3.8)];
const BUNKER_ROOF: f64 = FLOOR + 6.5;

/// Bunker whose front wall has openings at the given height bands.
fn bunker(l: &mut Layout, x: f64, openings: [(f64, f64); 2]) {
    let mut y = FLOOR;
    for (lo, hi) in openings {
        if lo > y {
            l.platform(x, y, x + 0.6, lo);
        }
        y = hi;
    }
    l.platform(x, y, x + 0.6, BUNKER_ROOF);
    l.platform(x, BUNKER_ROOF, x + 5.6, BUNKER_ROOF + 0.6);
    l.platform(x + 5.0, FLOOR, x + 5.6, BUNKER_ROOF);
}

fn build_9_1(p: &Params) -> Level {
    let x = p.get("x");
    let mut l = Layout::new();
    bunker(&mut l, x, [(FLOOR + 0.8, FLOOR + 1.5), (FLOOR + 3.0, FLOOR + 4.6)]);
    l.platform(x + 0.6, FLOOR + 2.5, x + 5.0, FLOOR + 3.0);
    l.pig(PigSize::Small, x + p.get("px"), FLOOR + 3.0);
    l.finish(&[BirdType::Red])
}

fn build_9_2(p: &Params) -> Level {
    let x = p.get("x");
    let mut l = Layout::new();
    bunker(&mut l, x, [(FLOOR, FLOOR + 1.6), (FLOOR + 3.5, FLOOR + 4.2)]);
    l.pig(PigSize::Small, x + p.get("px"), FLOOR);
    l.finish(&[BirdType::Red])
}

fn window_rule(level: &Level, x: f64, heights: &[f64]) -> Vec<Action> {
    let c = heights.iter().map(|y| sequence(&[at_point(level, Vec2::new(x + 0.3, FLOOR + y), ArcKind::Low)])).collect();
    first_passing(level, c)
}

fn rule_9_1(p: &Params, level: &Level) -> Vec<Action> {
    window_rule(level, p.get("x"), &[3.8, 3.6, 4.0, 3.5, 4.1])
}

fn rule_9_2(p: &Params, level: &Level) -> Vec<Action> {
    window_rule(level, p.get("x"), &[0.8, 0.7, 0.95, 0.6, 1.1])
}

// ---------------------------------------------------------------------------
// 10 shape difference: a ball rolls off its pillar, other shapes stop short

const R10: &[ParamRange] =
    &[range("x0", 24.0, 32.0), range("h", 5.0, 6.5), range("step", 2.0, 3.0), range("order", 0.0, 1.0)];

fn shape_pair(p: &Params, other: impl FnOnce(&mut Layout, f64, f64)) -> Level {
    let (x0, h, step) = (p.get("x0"), p.get("h"), p.get("step"));
    let ball_first = p.get("order") < 0.5;
    let (top_a, top_b) = (FLOOR + h, FLOOR + h + step);
    let mut l = Layout::new();
    l.platform(x0, FLOOR, x0 + 6.0, top_a);
    l.platform(x0 + 8.2, FLOOR, x0 + 14.2, top_b);
    l.platform(x0 + 16.4, FLOOR, x0 + 17.2, top_b + 3.0);
    let (ball_at, other_at) =
        if ball_first { ((x0 + 1.2, top_a), (x0 + 9.4, top_b)) } else { ((x0 + 9.4, top_b), (x0 + 1.2, top_a)) };
    l.ball(Stone, ball_at.0, ball_at.1, 0.9);
    other(&mut l, other_at.0, other_at.1);
    l.pig(PigSize::Small, if ball_first { x0 + 7.1 } else { x0 + 15.3 }, FLOOR);
    l.finish(&[BirdType::Red])
}

fn build_10_1(p: &Params) -> Level {
    shape_pair(p, |l, x, y| {
        l.block(Stone, x, y, 0.9, 0.9);
    })
}

fn build_10_2(p: &Params) -> Level {
    shape_pair(p, |l, x, y| {
        l.wedge(Stone, [Vec2::new(x - 1.0, y), Vec2::new(x + 1.0, y), Vec2::new(x - 1.0, y + 1.8)]);
    })
}

fn rule_ball(_: &Params, level: &Level) -> Vec<Action> {
    let i =
        level.bodies.iter().position(|b| matches!(b.shape, Shape::Circle { .. }) && b.material == Stone).unwrap_or(0);
    first_passing(
        level,
        vec![sequence(&[at_body(level, i, ArcKind::Low)]), sequence(&[at_body(level, i, ArcKind::High)])],
    )
}

// ---------------------------------------------------------------------------
// 11 non-greedy: killing the exposed pigs first drops a ball that plugs the
// tunnel holding the last pig

const R11_1: &[ParamRange] = &[range("mouth", 34.0, 46.0), range("len", 9.0, 11.0)];
const R11_2: &[ParamRange] = &[range("mouth", 36.0, 46.0), range("len", 9.0, 11.0), range("h", 2.0, 5.0)];

fn plug_level(mouth: f64, len: f64, y: f64) -> Level {
    let mut l = Layout::new();
    if y > FLOOR {
        l.platform(mouth - 6.0, FLOOR, mouth + len + 0.5, y);
    }
    let roof = y + 1.8;
    let hole = mouth + 4.6;
    l.platform(mouth, roof, hole, roof + 0.6);
    l.platform(hole + 2.1, roof, mouth + len + 0.5, roof + 0.6);
    l.platform(mouth + len, y, mouth + len + 0.5, roof);
    l.pig(PigSize::Small, mouth + len - 0.6, y);
    l.pig(PigSize::Small, hole - 3.6, roof + 0.6);
    l.pig(PigSize::Small, hole - 2.5, roof + 0.6);
    l.ball(Stone, hole - 1.0, roof + 0.6, 0.9);
    l.finish(&[BirdType::Red; 3])
}

fn build_11_1(p: &Params) -> Level {
    plug_level(p.get("mouth"), p.get("len"), FLOOR)
}

fn build_11_2(p: &Params) -> Level {
    plug_level(p.get("mouth"), p.get("len"), FLOOR + p.get("h"))
}

fn plug_rule(level: &Level, mouth: f64, y: f64) -> Vec<Action> {
    let p2 = at_body(level, pig_index(level, 1), ArcKind::Low);
    let p3 = at_body(level, pig_index(level, 2), ArcKind::Low);
    let c = skim_candidates(level, mouth, y).into_iter().map(|s| sequence(&[s, p2, p3])).collect();
    first_passing(level, c)
}

fn rule_11_1(p: &Params, level: &Level) -> Vec<Action> {
    plug_rule(level, p.get("mouth"), FLOOR)
}

fn rule_11_2(p: &Params, level: &Level) -> Vec<Action> {
    plug_rule(level, p.get("mouth"), FLOOR + p.get("h"))
}

// ---------------------------------------------------------------------------
// 12 structural analysis: knock out the support under a heavy block

const R12: &[ParamRange] = &[range("x0", 32.0, 55.0), range("h", 5.0, 7.0)];

fn build_12_1(p: &Params) -> Level {
    let x0 = p.get("x0");
    let mut l = Layout::new();
    let (top, slot) = slot_unit(&mut l, x0, p.get("h"), 3.0, 2.6, 3.1, 1.5);
    l.block(Wood, x0 + 2.75, top, 0.25, 1.0);
    l.block(Stone, x0 + 2.75, top + 2.0, 0.9, 0.35);
    l.pig(PigSize::Medium, slot, FLOOR);
    l.finish(&[BirdType::Red])
}

fn build_12_2(p: &Params) -> Level {
    let x0 = p.get("x0");
    let mut l = Layout::new();
    let (top, slot) = slot_unit(&mut l, x0, p.get("h"), 3.0, 2.6, 2.6, 1.3);
    l.block(Wood, x0 + 2.65, top, 0.35, 0.75);
    l.block(Stone, x0 + 2.65, top + 1.5, 1.2, 0.3);
    l.pig(PigSize::Medium, slot, FLOOR);
    l.finish(&[BirdType::Red])
}

/// Shoots the lowest wooden support.
fn rule_support(_: &Params, level: &Level) -> Vec<Action> {
    let i = index_of(level, Wood, 0);
    let c = [ArcKind::Low, ArcKind::High].iter().map(|k| sequence(&[at_body(level, i, *k)])).collect();
    first_passing(level, c)
}

// ---------------------------------------------------------------------------
// 13 clearing paths: an ice block must be removed before the real shot

const R13_1: &[ParamRange] = &[range("mouth", 35.0, 60.0), range("len", 5.0, 8.0)];

fn build_13_1(p: &Params) -> Level {
    let mouth = p.get("mouth");
    let mut l = Layout::new();
    l.block(Ice, mouth - 1.2, FLOOR, 0.45, 0.8);
    let px = tunnel(&mut l, mouth, FLOOR, p.get("len"), 1.8);
    l.pig(PigSize::Small, px, FLOOR);
    l.finish(&[BirdType::Red; 2])
}

fn rule_13_1(p: &Params, level: &Level) -> Vec<Action> {
    let clear = at_body(level, index_of(level, Ice, 0), ArcKind::Low);
    let c = skim_candidates(level, p.get("mouth"), FLOOR).into_iter().map(|s| sequence(&[clear, s])).collect();
    first_passing(level, c)
}

fn build_13_2(p: &Params) -> Level {
    let (h, x0, lead, len) = (p.get("h"), p.get("x0"), p.get("lead"), p.get("len"));
    let y = FLOOR + h;
    let mouth = x0 + lead + 2.5;
    let mut l = Layout::new();
    l.platform(x0, FLOOR, mouth + len + 0.5, y);
    l.ball(Stone, x0 + lead, y, 0.8);
    l.block(Ice, mouth - 0.7, y, 0.45, 0.9);
    let px = tunnel(&mut l, mouth, y, len, 2.0);
    l.pig(PigSize::Small, px, y);
    l.finish(&[BirdType::Red; 2])
}

fn rule_13_2(_: &Params, level: &Level) -> Vec<Action> {
    let ice = index_of(level, Ice, 0);
    let ball = index_of(level, Stone, 0);
    let clear = [at_body(level, ice, ArcKind::High), at_body(level, ice, ArcKind::Low)];
    let push = at_body(level, ball, ArcKind::Low);
    first_passing(level, clear.iter().map(|c| sequence(&[*c, push])).collect())
}

// ---------------------------------------------------------------------------
// 14 adequate timing: a moving gate in front of a pig under a roof

const GATE_HH: f64 = 2.2;
const GATE_TRAVEL: f64 = 7.0;

fn gate_level(x: f64, path: KinematicPath) -> Level {
    let mut l = Layout::new();
    l.pig(PigSize::Small, x, FLOOR);
    l.platform(x - 2.5, FLOOR + 4.2, x + 2.0, FLOOR + 4.8);
    l.platform(x + 1.4, FLOOR, x + 2.0, FLOOR + 4.2);
    l.gate(0.3, GATE_HH, path);
    l.finish(&[BirdType::Red])
}

fn gate_x(x: f64) -> f64 {
    x - 3.2
}

const R14_1: &[ParamRange] = &[range("x", 35.0, 60.0), range("period", 1.4, 2.2), range("phase", -0.12, 0.12)];

/// Seconds a full-speed low shot at the pig needs to reach the gate.
fn full_speed_gate_time(level: &Level, x: f64) -> f64 {
    let pig = level.bodies[pig_index(level, 0)].position;
    arc_to(level, pig, ArcKind::Low, V_MAX).map(|a| (gate_x(x) - ANCHOR.x) / a.velocity().x).unwrap_or(1.0)
}

/// The gate swings up and down; it is near its lowest when a full-speed
/// shot would arrive.
fn build_14_1(p: &Params) -> Level {
    let x = p.get("x");
    let period = p.get("period");
    let path = KinematicPath {
        base: Vec2::new(gate_x(x), FLOOR + GATE_HH),
        travel: Vec2::new(0.0, 0.65 * GATE_TRAVEL),
        start: 0.0,
        duration: period,
        periodic: true,
    };
    let mut level = gate_level(x, path);
    let start = full_speed_gate_time(&level, x) - p.get("phase") * period;
    if let Some(gate) = level.bodies.last_mut() {
        *gate = gate.clone().with_path(KinematicPath { start, ..path });
    }
    level
}

const R14_2: &[ParamRange] = &[range("x", 35.0, 60.0), range("delay", 0.3, 0.8)];

fn build_14_2(p: &Params) -> Level {
    let x = p.get("x");
    let mut level = gate_level(
        x,
        KinematicPath {
            base: Vec2::new(gate_x(x), FLOOR + GATE_HH),
            travel: Vec2::new(0.0, GATE_TRAVEL),
            start: 0.0,
            duration: 0.5,
            periodic: false,
        },
    );
    // The gate opens a little after a full-speed shot would reach it.
    let start = full_speed_gate_time(&level, x) + p.get("delay");
    if let Some(gate) = level.bodies.last_mut() {
        let path = KinematicPath { start, ..gate.path.expect("gate has a path") };
        *gate = gate.clone().with_path(path);
    }
    level
}

/// Slowest-first search over launch speeds for a low arc that meets the gate
/// while it is raised clear of the bird.
fn rule_gate(_: &Params, level: &Level) -> Vec<Action> {
    let Some(path) = level.bodies.last().and_then(|b| b.path) else { return Vec::new() };
    let pig = level.bodies[pig_index(level, 0)].position;
    let gx = path.base.x;
    let mut candidates = Vec::new();
    let mut speed = V_MAX;
    while speed > 12.0 && candidates.len() < 4 {
        if let Some(arc) = arc_to(level, pig, ArcKind::Low, speed) {
            let v = arc.velocity();
            let clear = (-6..=6).all(|k| {
                let x = gx + 0.2 * k as f64;
                let t = (x - ANCHOR.x) / v.x;
                let bird_y = point_at(ANCHOR, v, G, t).y;
                let gate_bottom = path.position_at(t).y - GATE_HH;
                gate_bottom > bird_y + RED_R + 0.3
            });
            if clear {
                candidates.push(vec![Action::new(arc.release)]);
            }
        }
        speed -= 0.25;
    }
    first_passing(level, candidates)
}

// ---------------------------------------------------------------------------
// 15 manoeuvring: bird powers

const R15_1: &[ParamRange] = &[range("x", 35.0, 62.0)];

fn build_15_1(p: &Params) -> Level {
    let x = p.get("x");
    let mut l = Layout::new();
    l.pig(PigSize::Small, x, FLOOR);
    l.block(Wood, x - 1.8, FLOOR, 0.5, 2.0);
    l.platform(x - 1.2, FLOOR + 2.3, x + 1.6, FLOOR + 2.8);
    l.platform(x + 1.0, FLOOR, x + 1.6, FLOOR + 2.3);
    l.finish(&[BirdType::Yellow])
}

fn rule_15_1(p: &Params, level: &Level) -> Vec<Action> {
    let x = p.get("x");
    let Some(arc) = arc_to(level, level.bodies[pig_index(level, 0)].position, ArcKind::Low, V_MAX) else {
        return Vec::new();
    };
    let c = [3.0, 2.0, 4.0, 1.5, 5.0]
        .iter()
        .filter_map(|d| tap_at_x(level, &arc, x - 2.3 - d))
        .map(|f| vec![Action::with_tap(arc.release, f)])
        .collect();
    first_passing(level, c)
}

const R15_2: &[ParamRange] = &[range("x", 30.0, 60.0), range("f", 0.35, 0.75)];

fn build_15_2(p: &Params) -> Level {
    let (x, f) = (p.get("x"), p.get("f"));
    let probe = Layout::new().finish(&[BirdType::Blue]);
    // The second pig sits where the lower split bird comes down.
    let target = FLOOR + 0.5;
    let x2 = arc_to(&probe, Vec2::new(x, target), ArcKind::Low, V_MAX)
        .and_then(|arc| {
            let (pos, vel) = state_at_fraction(&probe, arc.velocity(), f);
            let v = vel.rotate(-SPLIT_ANGLE);
            let g = -G.y;
            let disc = v.y * v.y + 2.0 * g * (pos.y - target);
            (disc >= 0.0).then(|| pos.x + v.x * (v.y + crate::math::sqrt(disc)) / g)
        })
        .filter(|x2| (x - 25.0..=x - 6.0).contains(x2))
        .unwrap_or(200.0);
    let mut l = Layout::new();
    l.pig(PigSize::Small, x, FLOOR);
    l.pig(PigSize::Small, x2, FLOOR);
    l.platform(x2 + 1.2, FLOOR, x2 + 1.8, FLOOR + 1.0);
    l.finish(&[BirdType::Blue])
}

fn rule_15_2(p: &Params, level: &Level) -> Vec<Action> {
    let pig = level.bodies[pig_index(level, 0)].position;
    let arc = arc_to(level, pig, ArcKind::Low, V_MAX);
    sequence(&[arc.map(|a| Action::with_tap(a.release, p.get("f")))])
}

const R15_3: &[ParamRange] = &[range("x", 38.0, 60.0)];

fn build_15_3(p: &Params) -> Level {
    let x = p.get("x");
    let mut l = Layout::new();
    l.platform(x, FLOOR, x + 0.6, FLOOR + 3.2);
    l.platform(x, FLOOR + 3.2, x + 4.6, FLOOR + 3.8);
    l.platform(x + 4.0, FLOOR, x + 4.6, FLOOR + 3.2);
    l.pig(PigSize::Small, x + 1.3, FLOOR);
    l.pig(PigSize::Small, x + 2.7, FLOOR);
    l.finish(&[BirdType::Black])
}

fn rule_15_3(p: &Params, level: &Level) -> Vec<Action> {
    let x = p.get("x");
    let c = [1.6, 1.2, 2.0, 2.6]
        .iter()
        .filter_map(|y| at_point(level, Vec2::new(x - 0.1, FLOOR + y), ArcKind::Low))
        .map(|a| vec![Action::with_tap(a.release, 0.3)])
        .collect();
    first_passing(level, c)
}

const R15_4: &[ParamRange] = &[range("x", 35.0, 60.0), range("above", 3.0, 7.0)];
const LID: f64 = FLOOR + 3.1;

/// Tick position nearest to the nominal drop point, where the egg is laid.
fn egg_drop(level: &Level, p: &Params) -> Option<(ArcSolution, f64, f64)> {
    let arc = arc_to(level, Vec2::new(p.get("x"), LID + p.get("above")), ArcKind::Low, V_MAX)?;
    let f = tap_at_x(level, &arc, p.get("x"))?;
    let (pos, _) = state_at_fraction(level, arc.velocity(), f);
    Some((arc, f, pos.x))
}

fn build_15_4(p: &Params) -> Level {
    let probe = Layout::new().finish(&[BirdType::White]);
    let xs = egg_drop(&probe, p).map(|(_, _, x)| x).unwrap_or(p.get("x"));
    let mut l = Layout::new();
    l.platform(xs - 2.2, FLOOR, xs - 1.6, LID - 0.5);
    l.platform(xs + 1.6, FLOOR, xs + 2.2, LID - 0.5);
    l.platform(xs - 2.2, LID - 0.5, xs - 0.4, LID);
    l.platform(xs + 0.4, LID - 0.5, xs + 2.2, LID);
    l.pig(PigSize::Small, xs, FLOOR);
    l.finish(&[BirdType::White])
}

fn rule_15_4(p: &Params, level: &Level) -> Vec<Action> {
    sequence(&[egg_drop(level, p).map(|(arc, f, _)| Action::with_tap(arc.release, f))])
}

// ---------------------------------------------------------------------------

const fn template(
    id: &'static str,
    scenario: u8,
    description: &'static str,
    ranges: &'static [ParamRange],
    build: super::Builder,
    rule: super::Rule,
    broad_train: bool,
) -> TaskTemplate {
    TaskTemplate {
        id,
        scenario: ScenarioId(scenario),
        description,
        ranges,
        build,
        rule,
        distractors: DISTRACT,
        broad_train,
    }
}

/// Every shipped template, ordered by scenario.
pub fn catalog() -> Vec<TaskTemplate> {
    vec![
        template("1.1", 1, "pig on an open pedestal hit by a flat shot", R1_1, build_1_1, rule_1_1, true),
        template("1.2", 1, "pig on a pillar behind a wall hit by a lob", R1_2, build_1_2, rule_high_at_pig, false),
        template("2.1", 2, "large pig in a lipped cup needs three flat shots", R2_1, build_2_1, rule_2_1, true),
        template("2.2", 2, "large pig in a cup on a pillar needs three lobs", R2_2, build_2_2, rule_2_2, false),
        template("3.1", 3, "ball pushed along a shelf into a tunnel", R_SHELF, build_3_1, rule_push_first, true),
        template("3.2", 3, "ball pushed down a ramp into a tunnel", R_RAMP, build_3_2, rule_push_first, false),
        template("4.1", 4, "ball pushed off a pillar into a slot", R4_1, build_4_1, rule_push_first, true),
        template("4.2", 4, "stone block pushed off a pillar into a slot", R4_2, build_4_2, rule_push_first, false),
        template("5.1", 5, "box slid along a shelf into a tunnel", R_SLIDE, build_5_1, rule_push_first, true),
        template("5.2", 5, "box slid down a ramp into a tunnel", R_RAMP, build_5_2, rule_push_first, false),
        template("6.1", 6, "bird skids off the ground into a low tunnel", R6_1, build_6_1, rule_6_1, true),
        template("6.2", 6, "bird rebounds off a wall into a slot", R6_2, build_6_2, rule_6_2, false),
        template("7.1", 7, "heavy block under a light one above a slot", R7, build_7_1, rule_stone, true),
        template("7.2", 7, "heavy block over a light one above a slot", R7, build_7_2, rule_stone, false),
        template("8.1", 8, "tall post toppled onto a roofed pig", R8_1, build_8_1, rule_tallest, true),
        template("8.2", 8, "block on the short post toppled under a roof", R8_2, build_8_2, rule_8_2, false),
        template("9.1", 9, "bunker entered through its wide upper window", R9, build_9_1, rule_9_1, true),
        template("9.2", 9, "bunker entered through its wide lower window", R9, build_9_2, rule_9_2, false),
        template("10.1", 10, "ball rolls off its pillar while a box stays", R10, build_10_1, rule_ball, true),
        template("10.2", 10, "ball rolls off its pillar while a wedge stays", R10, build_10_2, rule_ball, false),
        template("11.1", 11, "tunnel pig first, before a ball plugs the tunnel", R11_1, build_11_1, rule_11_1, true),
        template("11.2", 11, "raised tunnel pig first, before a ball plugs it", R11_2, build_11_2, rule_11_2, false),
        template("12.1", 12, "column holding a stone slab over a slot", R12, build_12_1, rule_support, true),
        template("12.2", 12, "thick column holding a wide slab over a slot", R12, build_12_2, rule_support, false),
        template("13.1", 13, "ice block cleared from a tunnel mouth", R13_1, build_13_1, rule_13_1, true),
        template("13.2", 13, "ice block cleared before a ball is pushed", R_SHELF, build_13_2, rule_13_2, false),
        template("14.1", 14, "shot timed through an oscillating gate", R14_1, build_14_1, rule_gate, true),
        template("14.2", 14, "slow shot timed to a gate that opens late", R14_2, build_14_2, rule_gate, false),
        template("15.1", 15, "yellow bird accelerated through a wooden wall", R15_1, build_15_1, rule_15_1, true),
        template("15.2", 15, "blue bird split to reach two pigs", R15_2, build_15_2, rule_15_2, false),
        template("15.3", 15, "black bird blast through a hut wall", R15_3, build_15_3, rule_15_3, true),
        template("15.4", 15, "white bird egg dropped through a slit", R15_4, build_15_4, rule_15_4, false),
    ]
}
