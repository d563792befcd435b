use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{Algorithm, Architecture};
use crate::vector::ParamVector;
use crate::vr_core::SfoCounter;

/// What happened at one server iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub k: usize,
    /// Worker whose job was consumed (`None` on sync iterations).
    pub worker: Option<usize>,
    /// Realized staleness `k_apply − k_pull` of the consumed job.
    pub tau: Option<usize>,
    pub sync: bool,
    /// Coordinate updated (shared memory only, 0-based).
    pub coord: Option<usize>,
}

/// Side-channel evaluation of the iterate; not charged to either counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub epoch: usize,
    /// `f(x_k)`
    pub loss: f64,
    /// `‖∇f(x_k)‖²`
    pub grad_norm_sq: f64,
    /// Counters after iteration `k` has been processed.
    pub sfo: SfoCounter,
}

/// A job that was cancelled by an outer sync before it could be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interruption {
    pub worker: usize,
    pub job: u64,
    pub pull: usize,
    pub at: usize,
    /// Gradient evaluations already spent on the job.
    pub charged: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub architecture: Architecture,
    /// One record per iteration, `len == K`.
    pub steps: Vec<StepRecord>,
    /// Evaluation grid, every `max(1, K/500)` iterations plus the final iterate.
    pub grid: Vec<GridPoint>,
    /// Output index drawn uniformly from `1..=K`.
    pub zeta: usize,
    pub x_zeta: ParamVector,
    pub grad_norm_sq_at_zeta: f64,
    pub x_final: ParamVector,
    pub final_loss: f64,
    pub sfo: SfoCounter,
    pub max_tau: usize,
    pub interruptions: Vec<Interruption>,
    /// Direct-mode slot redraws.
    pub redraws: usize,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn taus(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().filter_map(|s| s.tau)
    }
}
