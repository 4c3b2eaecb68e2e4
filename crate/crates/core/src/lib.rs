//! Interactive learning from a teacher as a nested-belief decision problem.
//!
//! - [`pomdp`]: finite POMDP models, exact belief updates, entropy utilities
//! - [`planner`]: finite-horizon expectimax over beliefs
//! - [`nesting`]: interactive beliefs, level-k agent models, nested updates
//! - [`particle`]: sampled approximations of flat and interactive beliefs
//! - [`domain`]: the objects game played by a student and a teacher
//! - [`harness`]: seeded episodes, batches, metrics, traces and the oracle
//! - [`session`]: message protocol for live teaching sessions

pub mod domain;
pub mod error;
pub mod harness;
pub mod nesting;
pub mod particle;
pub mod planner;
pub mod pomdp;
pub mod session;

pub use error::{Error, Result};
