//! Core of a physical-reasoning puzzle testbed: a deterministic 2D physics
//! world with slingshot game rules, observation encoders, a trajectory
//! planner, procedural task templates for fifteen physical scenarios,
//! baseline agents and the Phy-Q scoring arithmetic.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod agents;
pub mod catalog;
pub mod game;
pub mod math;
pub mod perception;
pub mod physics;
pub mod rng;
pub mod score;
pub mod taskgen;
pub mod trajectory;
