//! Deterministic fixed-timestep rigid-body simulation.
//!
//! Semi-implicit Euler, sequential impulses with warm starting and
//! speculative contacts, non-linear position correction, impulse-threshold
//! damage. Every iteration order follows body ids; no hashing is involved.

pub mod body;
pub mod collide;
pub mod material;
pub mod shape;
pub mod world;

pub use body::{Body, BodyId, KinematicPath};
pub use collide::{collide, Manifold, ManifoldPoint};
pub use material::{Material, MaterialKind};
pub use shape::{Polygon, Shape};
pub use world::{is_settled, Contact, PhysicsConfig, SettleTracker, World};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhysicsError {
    #[error("invalid shape: {0}")]
    InvalidShape(&'static str),
}
