//! Ballistic shot planning: release offsets for a target point, low and high
//! arcs, obstruction checks and visualiser polylines.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::game::{velocity_to_release, SHOT_TIMEOUT, V_MAX};
use crate::math::{atan2, cos, sin, sqrt, Aabb, Vec2};
use crate::physics::{Body, BodyId, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("target is unreachable at the given speed")]
    Unreachable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Low,
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSolution {
    pub release: Vec2,
    pub arc: ArcKind,
    pub launch_angle: f64,
    pub speed: f64,
    /// Seconds of flight from the anchor to the target.
    pub time_to_target: f64,
    /// Parabola sampled once per tick from the anchor until it leaves the
    /// level.
    pub predicted_path: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_obstruction: Option<BodyId>,
}

impl ArcSolution {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.launch_angle) * self.speed
    }

    pub fn apex(&self, anchor: Vec2, gravity: Vec2) -> f64 {
        let vy = self.velocity().y;
        if vy <= 0.0 {
            anchor.y
        } else {
            anchor.y + vy * vy / (2.0 * -gravity.y)
        }
    }
}

/// Position on the ballistic path at time `t`.
pub fn point_at(anchor: Vec2, velocity: Vec2, gravity: Vec2, t: f64) -> Vec2 {
    anchor + velocity * t + gravity * (0.5 * t * t)
}

/// Samples the path every `dt` seconds until it drops below `bounds` or
/// leaves it sideways; the first sample outside is included.
pub fn predicted_path(anchor: Vec2, velocity: Vec2, gravity: Vec2, bounds: &Aabb, dt: f64) -> Vec<Vec2> {
    let mut path = alloc::vec![anchor];
    let steps = (SHOT_TIMEOUT / dt) as usize;
    for n in 1..=steps {
        let p = point_at(anchor, velocity, gravity, n as f64 * dt);
        path.push(p);
        if p.y < bounds.min.y || p.x < bounds.min.x || p.x > bounds.max.x {
            break;
        }
    }
    path
}

/// Launch arcs through `target` at the given speed, lower apex first.
///
/// A zero discriminant (within rounding) yields a single low arc.
pub fn solve_release(
    anchor: Vec2,
    target: Vec2,
    speed: f64,
    gravity: Vec2,
    bounds: &Aabb,
    dt: f64,
) -> Result<Vec<ArcSolution>, TrajectoryError> {
    let g = -gravity.y;
    let d = target - anchor;
    let speed = speed.min(V_MAX);
    if d.length() < 1e-9 || !(speed > 0.0) || !(g > 0.0) {
        return Err(TrajectoryError::Unreachable);
    }
    let v2 = speed * speed;
    let disc = v2 * v2 - g * (g * d.x * d.x + 2.0 * d.y * v2);
    let tol = 1e-9 * v2 * v2;
    if disc < -tol {
        return Err(TrajectoryError::Unreachable);
    }
    let root = if disc > tol { sqrt(disc) } else { 0.0 };
    let mut angles = alloc::vec![atan2(v2 - root, g * d.x)];
    if root > 0.0 {
        angles.push(atan2(v2 + root, g * d.x));
    }
    angles.sort_by(|a, b| sin(*a).abs().total_cmp(&sin(*b).abs()));

    let mut out = Vec::new();
    for (k, theta) in angles.into_iter().enumerate() {
        let v = Vec2::from_angle(theta) * speed;
        let time = if d.x.abs() > 1e-9 {
            d.x / v.x
        } else {
            // Straight up: the earliest time at which the height is reached.
            (v.y - sqrt((v.y * v.y - 2.0 * g * d.y).max(0.0))) / g
        };
        out.push(ArcSolution {
            release: velocity_to_release(v),
            arc: if k == 0 { ArcKind::Low } else { ArcKind::High },
            launch_angle: theta,
            speed,
            time_to_target: time,
            predicted_path: predicted_path(anchor, v, gravity, bounds, dt),
            first_obstruction: None,
        });
    }
    Ok(out)
}

/// First body a disk of `bird_radius` touches when swept along the arc,
/// ignoring sensors and birds. The sweep advances by half a radius and ends
/// when the path leaves `bounds`.
pub fn first_obstruction(
    anchor: Vec2,
    arc: &ArcSolution,
    world: &World,
    bird_radius: f64,
    bounds: &Aabb,
) -> Option<BodyId> {
    first_obstruction_among(anchor, arc.velocity(), world.gravity(), world.bodies(), bird_radius, bounds)
}

pub fn first_obstruction_among(
    anchor: Vec2,
    velocity: Vec2,
    gravity: Vec2,
    bodies: &[Body],
    bird_radius: f64,
    bounds: &Aabb,
) -> Option<BodyId> {
    let candidates: Vec<&Body> = bodies.iter().filter(|b| !b.sensor && !b.class.is_bird()).collect();
    let step = bird_radius * 0.5;
    let mut t = 0.0;
    while t < SHOT_TIMEOUT {
        let p = point_at(anchor, velocity, gravity, t);
        if p.y < bounds.min.y || p.x < bounds.min.x || p.x > bounds.max.x {
            return None;
        }
        let mut best: Option<(f64, BodyId)> = None;
        for b in &candidates {
            let r = b.shape.bounding_radius();
            if p.distance(b.position) > r + bird_radius {
                continue;
            }
            let d = b.shape.distance(&b.transform(), p);
            if d < bird_radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, b.id));
            }
        }
        if let Some((_, id)) = best {
            return Some(id);
        }
        let vt = velocity + gravity * t;
        t += step / vt.length().max(1e-6);
    }
    None
}

/// Aim points for a body: its centroid, then the top-most point of its
/// outline nudged upward by `lift`.
pub fn aim_points(body: &Body, lift: f64) -> [Vec2; 2] {
    let top =
        body.shape
            .outline(&body.transform(), 16)
            .into_iter()
            .fold(body.position, |best, v| if v.y > best.y { v } else { best });
    [body.position, top + Vec2::new(0.0, lift)]
}

/// Arcs toward `body` at full speed, aiming at its centroid and falling back
/// to its top when the centroid is unreachable. Each arc carries its first
/// obstruction.
pub fn plan_to_body(anchor: Vec2, body: &Body, world: &World, bird_radius: f64, bounds: &Aabb) -> Vec<ArcSolution> {
    for aim in aim_points(body, 0.0) {
        if let Ok(mut arcs) = solve_release(anchor, aim, V_MAX, world.gravity(), bounds, world.dt()) {
            for a in arcs.iter_mut() {
                a.first_obstruction = first_obstruction(anchor, a, world, bird_radius, bounds);
            }
            return arcs;
        }
    }
    Vec::new()
}

/// Convenience for agents that only need to know whether a class is hittable.
pub fn is_target_class(class: ObjectClass) -> bool {
    !matches!(class, ObjectClass::Slingshot | ObjectClass::Platform) && !class.is_bird()
}

/// Launch angle of a release direction at full stretch, used by the
/// discrete action table.
pub fn release_for_angle(theta: f64) -> Vec2 {
    velocity_to_release(Vec2::new(cos(theta), sin(theta)) * V_MAX)
}
