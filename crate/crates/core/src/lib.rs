//! Multi-agent deep deterministic policy gradient with parameter sharing.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: a small MLP engine with exact backpropagation and Adam,
//! a replay memory, 2-D particle environments, the four trainers
//! (`maddpg`, `v0`, `v1`, `v2`) and evaluation helpers. File formats, the
//! CLI and wall-clock measurement live in the `psmaddpg` crate.
#![no_std]

extern crate alloc;

pub mod envs;
mod error;
pub mod eval;
pub mod memory;
pub mod net;
pub mod trainers;

pub use error::{Error, Result};
