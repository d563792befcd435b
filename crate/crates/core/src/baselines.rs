//! Async-SGD and Async-SVRG on the same scheduler, delay model, counters and
//! trace machinery as SYNTHESIS.
//!
//! * Async-SGD: `v_k = (1/|S|) Σ ∇f(x_{k−τ(k)}, ξ_i)`, no outer loop.
//! * Async-SVRG: every `q` iterations anchors `x̃ = x_k`, `g̃ = ∇f(x̃)`; inner
//!   iterations use `v_k = (1/|S|) Σ [∇f(x_{k−τ(k)}, ξ_i) − ∇f(x̃, ξ_i)] + g̃`
//!   with batches from the whole dataset.

use crate::config::{Algorithm, Architecture, RunConfig};
use crate::data::Dataset;
use crate::engine::{self, NoObserver};
use crate::error::Result;
use crate::objective::ObjectiveModel;
use crate::trace::Trace;

pub fn run_async_sgd(arch: Architecture, cfg: &RunConfig, model: &ObjectiveModel, data: &Dataset) -> Result<Trace> {
    engine::simulate(Algorithm::AsyncSgd, arch, cfg, model, data, &mut NoObserver)
}

pub fn run_async_svrg(arch: Architecture, cfg: &RunConfig, model: &ObjectiveModel, data: &Dataset) -> Result<Trace> {
    engine::simulate(Algorithm::AsyncSvrg, arch, cfg, model, data, &mut NoObserver)
}
