use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Wood,
    Ice,
    Stone,
    Pig,
    Bird,
    Platform,
}

/// Physical and damage constants of a material.
///
/// A contact whose impulse exceeds `damage_threshold` removes
/// `(impulse - damage_threshold) * damage_scale` health.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub kind: MaterialKind,
    pub density: f64,
    pub restitution: f64,
    pub friction: f64,
    pub base_health: f64,
    pub damage_threshold: f64,
    pub damage_scale: f64,
}

pub const WOOD: Material = Material {
    kind: MaterialKind::Wood,
    density: 1.0,
    restitution: 0.2,
    friction: 0.5,
    base_health: 50.0,
    damage_threshold: 5.0,
    damage_scale: 1.0,
};

pub const ICE: Material = Material {
    kind: MaterialKind::Ice,
    density: 0.7,
    restitution: 0.1,
    friction: 0.1,
    base_health: 10.0,
    damage_threshold: 2.0,
    damage_scale: 1.0,
};

pub const STONE: Material = Material {
    kind: MaterialKind::Stone,
    density: 2.5,
    restitution: 0.1,
    friction: 0.6,
    base_health: 150.0,
    damage_threshold: 10.0,
    damage_scale: 1.0,
};

pub const PIG: Material = Material {
    kind: MaterialKind::Pig,
    density: 1.0,
    restitution: 0.1,
    friction: 0.5,
    base_health: 14.0,
    damage_threshold: 1.5,
    damage_scale: 1.0,
};

pub const BIRD: Material = Material {
    kind: MaterialKind::Bird,
    density: 2.0,
    restitution: 0.4,
    friction: 0.5,
    base_health: 1.0e9,
    damage_threshold: 0.0,
    damage_scale: 0.0,
};

pub const PLATFORM: Material = Material {
    kind: MaterialKind::Platform,
    density: 0.0,
    restitution: 0.3,
    friction: 0.6,
    base_health: f64::INFINITY,
    damage_threshold: f64::INFINITY,
    damage_scale: 0.0,
};

impl Material {
    pub fn of(kind: MaterialKind) -> Material {
        match kind {
            MaterialKind::Wood => WOOD,
            MaterialKind::Ice => ICE,
            MaterialKind::Stone => STONE,
            MaterialKind::Pig => PIG,
            MaterialKind::Bird => BIRD,
            MaterialKind::Platform => PLATFORM,
        }
    }

    /// Health lost to a single contact impulse.
    pub fn damage_from_impulse(&self, impulse: f64) -> f64 {
        if self.kind == MaterialKind::Platform {
            return 0.0;
        }
        (impulse - self.damage_threshold).max(0.0) * self.damage_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_respect_invariants() {
        for kind in [
            MaterialKind::Wood,
            MaterialKind::Ice,
            MaterialKind::Stone,
            MaterialKind::Pig,
            MaterialKind::Bird,
            MaterialKind::Platform,
        ] {
            let m = Material::of(kind);
            assert!((0.0..=1.0).contains(&m.restitution));
            assert!(m.friction >= 0.0);
            if kind == MaterialKind::Platform {
                assert!(m.base_health.is_infinite());
            } else {
                assert!(m.density > 0.0);
                assert!(m.base_health.is_finite());
            }
        }
    }

    #[test]
    fn below_threshold_impulse_does_no_damage() {
        assert_eq!(WOOD.damage_from_impulse(WOOD.damage_threshold * 0.5), 0.0);
        assert_eq!(PLATFORM.damage_from_impulse(1.0e6), 0.0);
        assert!((ICE.damage_from_impulse(ICE.damage_threshold + 2.0) - 2.0).abs() < 1e-12);
    }
}
