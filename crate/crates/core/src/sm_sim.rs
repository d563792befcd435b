//! Shared-memory SYNTHESIS: `T` threads over one shared iterate.
//!
//! The estimator machinery and delay model match [`crate::dm_sim`], with two
//! differences: threads draw mini-batches from the whole dataset, and each
//! iteration (sync iterations included) moves a single coordinate `m_k`
//! drawn uniformly from `0..d`:
//! `x_{k+1}[m_k] = x_k[m_k] − η v_k[m_k]`.

use crate::config::{Algorithm, Architecture, RunConfig};
use crate::data::Dataset;
use crate::engine::{self, NoObserver, Observer};
use crate::error::Result;
use crate::objective::ObjectiveModel;
use crate::trace::Trace;

pub fn run_synthesis_sm(cfg: &RunConfig, model: &ObjectiveModel, data: &Dataset) -> Result<Trace> {
    engine::simulate(Algorithm::Synthesis, Architecture::Shared, cfg, model, data, &mut NoObserver)
}

pub fn run_synthesis_sm_observed<O: Observer + ?Sized>(
    cfg: &RunConfig,
    model: &ObjectiveModel,
    data: &Dataset,
    observer: &mut O,
) -> Result<Trace> {
    engine::simulate(Algorithm::Synthesis, Architecture::Shared, cfg, model, data, observer)
}
