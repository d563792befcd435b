//! Deterministic simulator for semi-asynchronous, path-integrated
//! variance-reduced stochastic optimization.
//!
//! The crate is `no_std` (with `alloc`). All randomness comes from named,
//! seeded streams in [`rng`], so every run is reproducible bit for bit.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod baselines;
pub mod config;
pub mod data;
pub mod dm_sim;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod rng;
pub mod schedule;
pub mod sm_sim;
pub mod stability;
pub mod trace;
pub mod vector;
pub mod vr_core;

pub use config::{Algorithm, Architecture, Init, RunConfig, Sampling};
pub use data::Dataset;
pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use objective::{ModelKind, ObjectiveModel, Sample};
pub use schedule::DelayMode;
pub use trace::Trace;
pub use vector::ParamVector;
