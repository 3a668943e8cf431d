//! Std companion to `phyq-core`: task files, the evaluation harness,
//! reports, the agent server and the command line.

pub mod checks;
pub mod eval;
pub mod files;
pub mod reports;
pub mod server;
