use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::math::{Aabb, Transform, Vec2};
use crate::physics::material::{Material, MaterialKind};
use crate::physics::shape::Shape;

pub type BodyId = u32;

/// Scheduled motion of a non-dynamic body, a function of simulated time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicPath {
    /// Position at the start of the schedule.
    pub base: Vec2,
    /// Full displacement covered by the schedule.
    pub travel: Vec2,
    /// Seconds of world time before motion begins.
    pub start: f64,
    /// Seconds to cover `travel` (one-shot) or one full period (periodic).
    pub duration: f64,
    /// Periodic paths oscillate `base -> base + travel -> base` forever.
    pub periodic: bool,
}

impl KinematicPath {
    pub fn position_at(&self, t: f64) -> Vec2 {
        let u = ((t - self.start) / self.duration).max(0.0);
        let s = if self.periodic { 0.5 - 0.5 * crate::math::cos(core::f64::consts::TAU * u) } else { u.min(1.0) };
        self.base + self.travel * s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Body {
    pub id: BodyId,
    pub shape: Shape,
    pub material: Material,
    pub class: ObjectClass,
    pub position: Vec2,
    pub rotation: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    pub health: f64,
    pub dynamic: bool,
    /// Sensors never collide (the slingshot).
    pub sensor: bool,
    /// Bodies sharing a non-zero group never collide with each other.
    pub group: u32,
    pub path: Option<KinematicPath>,
    pub(crate) inv_mass: f64,
    pub(crate) inv_inertia: f64,
    pub(crate) mass: f64,
}

impl Body {
    /// A dynamic body at full health for its material.
    pub fn dynamic(shape: Shape, material: Material, class: ObjectClass, position: Vec2, rotation: f64) -> Body {
        let (mass, inertia) = shape.mass_properties(material.density);
        Body {
            id: 0,
            shape,
            material,
            class,
            position,
            rotation,
            linear_velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            health: material.base_health,
            dynamic: true,
            sensor: false,
            group: 0,
            path: None,
            inv_mass: 1.0 / mass,
            inv_inertia: 1.0 / inertia,
            mass,
        }
    }

    /// An immovable platform.
    pub fn fixed(shape: Shape, position: Vec2, rotation: f64) -> Body {
        let material = Material::of(MaterialKind::Platform);
        Body {
            id: 0,
            shape,
            material,
            class: ObjectClass::Platform,
            position,
            rotation,
            linear_velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            health: material.base_health,
            dynamic: false,
            sensor: false,
            group: 0,
            path: None,
            inv_mass: 0.0,
            inv_inertia: 0.0,
            mass: 0.0,
        }
    }

    pub fn with_health_multiplier(mut self, k: f64) -> Body {
        self.health = self.material.base_health * k;
        self
    }

    pub fn as_sensor(mut self) -> Body {
        self.sensor = true;
        self
    }

    pub fn with_path(mut self, path: KinematicPath) -> Body {
        self.position = path.position_at(0.0);
        self.path = Some(path);
        self
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn transform(&self) -> Transform {
        Transform::new(self.position, self.rotation)
    }

    pub fn aabb(&self) -> Aabb {
        self.shape.aabb(&self.transform())
    }

    pub fn is_static(&self) -> bool {
        !self.dynamic
    }

    pub fn kinetic_energy(&self) -> f64 {
        if !self.dynamic {
            return 0.0;
        }
        let inertia = if self.inv_inertia > 0.0 { 1.0 / self.inv_inertia } else { 0.0 };
        0.5 * self.mass * self.linear_velocity.length_squared()
            + 0.5 * inertia * self.angular_velocity * self.angular_velocity
    }

    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        self.linear_velocity + Vec2::cross_sv(self.angular_velocity, p - self.position)
    }

    pub fn apply_impulse(&mut self, impulse: Vec2, point: Vec2) {
        if !self.dynamic {
            return;
        }
        self.linear_velocity += impulse * self.inv_mass;
        self.angular_velocity += self.inv_inertia * (point - self.position).cross(impulse);
    }
}
