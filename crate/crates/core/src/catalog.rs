//! Object classes shared by the simulator, the observation encoders and the
//! agents.

use serde::{Deserialize, Serialize};

/// Bird species. Each has a fixed power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirdType {
    Red,
    Yellow,
    Blue,
    White,
    Black,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Power {
    None,
    Accelerate,
    Split3,
    DropEgg,
    Explode,
}

impl BirdType {
    pub const ALL: [BirdType; 5] = [BirdType::Red, BirdType::Yellow, BirdType::Blue, BirdType::White, BirdType::Black];

    pub fn power(self) -> Power {
        match self {
            BirdType::Red => Power::None,
            BirdType::Yellow => Power::Accelerate,
            BirdType::Blue => Power::Split3,
            BirdType::White => Power::DropEgg,
            BirdType::Black => Power::Explode,
        }
    }

    pub fn has_power(self) -> bool {
        self.power() != Power::None
    }

    pub fn radius(self) -> f64 {
        match self {
            BirdType::Blue => 0.35,
            BirdType::White | BirdType::Black => 0.55,
            _ => 0.45,
        }
    }

    pub fn class(self) -> ObjectClass {
        match self {
            BirdType::Red => ObjectClass::RedBird,
            BirdType::Yellow => ObjectClass::YellowBird,
            BirdType::Blue => ObjectClass::BlueBird,
            BirdType::White => ObjectClass::WhiteBird,
            BirdType::Black => ObjectClass::BlackBird,
        }
    }
}

/// Pig sizes; health grows with size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PigSize {
    Small,
    Medium,
    Large,
}

impl PigSize {
    pub fn health_multiplier(self) -> f64 {
        match self {
            PigSize::Small => 1.0,
            PigSize::Medium => 2.0,
            PigSize::Large => 4.0,
        }
    }

    pub fn radius(self) -> f64 {
        match self {
            PigSize::Small => 0.5,
            PigSize::Medium => 0.7,
            PigSize::Large => 0.9,
        }
    }
}

/// The twelve observable object classes, in tensor channel order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    RedBird,
    YellowBird,
    BlueBird,
    WhiteBird,
    BlackBird,
    Pig,
    Wood,
    Ice,
    Stone,
    Platform,
    Tnt,
    Slingshot,
}

impl ObjectClass {
    pub const COUNT: usize = 12;

    pub const ALL: [ObjectClass; 12] = [
        ObjectClass::RedBird,
        ObjectClass::YellowBird,
        ObjectClass::BlueBird,
        ObjectClass::WhiteBird,
        ObjectClass::BlackBird,
        ObjectClass::Pig,
        ObjectClass::Wood,
        ObjectClass::Ice,
        ObjectClass::Stone,
        ObjectClass::Platform,
        ObjectClass::Tnt,
        ObjectClass::Slingshot,
    ];

    pub fn channel(self) -> usize {
        self as usize
    }

    pub fn from_channel(k: usize) -> Option<ObjectClass> {
        ObjectClass::ALL.get(k).copied()
    }

    pub fn is_bird(self) -> bool {
        (self as usize) < 5
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::RedBird => "red_bird",
            ObjectClass::YellowBird => "yellow_bird",
            ObjectClass::BlueBird => "blue_bird",
            ObjectClass::WhiteBird => "white_bird",
            ObjectClass::BlackBird => "black_bird",
            ObjectClass::Pig => "pig",
            ObjectClass::Wood => "wood",
            ObjectClass::Ice => "ice",
            ObjectClass::Stone => "stone",
            ObjectClass::Platform => "platform",
            ObjectClass::Tnt => "tnt",
            ObjectClass::Slingshot => "slingshot",
        }
    }

    pub fn from_name(name: &str) -> Option<ObjectClass> {
        ObjectClass::ALL.iter().copied().find(|c| c.name() == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bird_powers_follow_catalog() {
        assert_eq!(BirdType::Red.power(), Power::None);
        assert_eq!(BirdType::Yellow.power(), Power::Accelerate);
        assert_eq!(BirdType::Blue.power(), Power::Split3);
        assert_eq!(BirdType::White.power(), Power::DropEgg);
        assert_eq!(BirdType::Black.power(), Power::Explode);
    }

    #[test]
    fn pig_health_increases_with_size() {
        assert!(PigSize::Small.health_multiplier() < PigSize::Medium.health_multiplier());
        assert!(PigSize::Medium.health_multiplier() < PigSize::Large.health_multiplier());
    }

    #[test]
    fn exactly_twelve_classes_with_distinct_names() {
        assert_eq!(ObjectClass::ALL.len(), ObjectClass::COUNT);
        for (k, c) in ObjectClass::ALL.iter().enumerate() {
            assert_eq!(c.channel(), k);
            assert_eq!(ObjectClass::from_name(c.name()), Some(*c));
        }
    }
}
