//! Run configuration shared by every simulator.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::schedule::DelayMode;

/// Which optimizer the simulator drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Semi-asynchronous path-integrated variance reduction.
    Synthesis,
    AsyncSgd,
    AsyncSvrg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Synthesis, Algorithm::AsyncSgd, Algorithm::AsyncSvrg];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Synthesis => "synthesis",
            Algorithm::AsyncSgd => "async-sgd",
            Algorithm::AsyncSvrg => "async-svrg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Whether the algorithm has synchronized outer iterations.
    pub fn has_outer_loop(self) -> bool {
        !matches!(self, Algorithm::AsyncSgd)
    }
}

/// Memory architecture being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Parameter server with `P` workers holding data shards; every update
    /// moves the full vector.
    Distributed,
    /// `T` threads over one shared iterate; every update moves one uniformly
    /// drawn coordinate.
    Shared,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Distributed => "dm",
            Architecture::Shared => "sm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dm" => Some(Architecture::Distributed),
            "sm" => Some(Architecture::Shared),
            _ => None,
        }
    }
}

/// Where a job draws its mini-batch from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// The worker's own contiguous shard.
    Shard,
    /// The whole dataset.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Independent normal coordinates with this standard deviation.
    Gaussian { std: f64 },
}

/// Resolved parameters of one run. `auto` rules live in [`auto_epoch_len`]
/// and [`auto_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `P` workers (distributed) or `T` threads (shared).
    pub workers: usize,
    /// Staleness bound `Δ`.
    pub max_delay: usize,
    /// Epoch length `q`.
    pub epoch_len: usize,
    /// Mini-batch size `|S|`.
    pub batch: usize,
    /// Step size `η`.
    pub step: f64,
    /// Total iterations `K`.
    pub iterations: usize,
    pub seed: u64,
    pub delay_mode: DelayMode,
    /// `None` picks the per-algorithm default (see [`RunConfig::sampling_for`]).
    pub sampling: Option<Sampling>,
    pub init: Init,
    /// Shared memory only: move every coordinate on sync iterations.
    pub full_step_on_sync: bool,
    /// Target number of evaluation-grid points (stride `max(1, K / n)`).
    pub grid_points: usize,
}

impl RunConfig {
    pub fn new(workers: usize, max_delay: usize, epoch_len: usize, batch: usize, step: f64, iterations: usize, seed: u64) -> Self {
        RunConfig {
            workers,
            max_delay,
            epoch_len,
            batch,
            step,
            iterations,
            seed,
            delay_mode: DelayMode::Direct,
            sampling: None,
            init: Init::Zeros,
            full_step_on_sync: false,
            grid_points: 500,
        }
    }

    /// Configuration with `q = |S| = ⌈√N⌉` and the architecture's step rule.
    pub fn auto(arch: Architecture, n: usize, workers: usize, max_delay: usize, smoothness: f64, iterations: usize, seed: u64) -> Self {
        let q = auto_epoch_len(n);
        RunConfig::new(workers, max_delay, q, q, auto_step(arch, smoothness, max_delay), iterations, seed)
    }

    /// Default batch source: shards for distributed SYNTHESIS and Async-SGD,
    /// the whole dataset for Async-SVRG and for every shared-memory run.
    pub fn sampling_for(&self, algo: Algorithm, arch: Architecture) -> Sampling {
        if let Some(s) = self.sampling {
            return s;
        }
        match (arch, algo) {
            (Architecture::Shared, _) | (_, Algorithm::AsyncSvrg) => Sampling::Global,
            _ => Sampling::Shard,
        }
    }

    pub fn grid_stride(&self) -> usize {
        (self.iterations / self.grid_points.max(1)).max(1)
    }

    /// Field-level validation; returns advisory warnings.
    pub fn validate(&self, n: usize) -> Result<Vec<String>> {
        if self.workers == 0 {
            return Err(invalid("P", "must be at least 1"));
        }
        if self.epoch_len == 0 {
            return Err(invalid("q", "must be at least 1"));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "must be at least 1"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("eta", "must be finite and positive"));
        }
        if self.iterations == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        if let Init::Gaussian { std } = self.init {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(invalid("init", "standard deviation must be finite and non-negative"));
            }
        }
        let mut warnings = Vec::new();
        if self.workers * self.workers > n {
            warnings.push(format!("P = {} exceeds sqrt(N) for N = {}", self.workers, n));
        }
        if self.delay_mode == DelayMode::Direct && self.workers > self.max_delay + 1 {
            warnings.push(format!(
                "direct delay mode with P = {} > delta + 1 = {} may have no feasible slots",
                self.workers,
                self.max_delay + 1
            ));
        }
        Ok(warnings)
    }
}

/// `⌈√n⌉`, computed exactly in integers.
pub fn auto_epoch_len(n: usize) -> usize {
    let mut r = libm::sqrt(n as f64) as usize;
    while r * r < n {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r.max(1)
}

/// `1/(4L(Δ+1))` for distributed memory, `1/(2L(Δ+1))` for shared memory.
pub fn auto_step(arch: Architecture, smoothness: f64, max_delay: usize) -> f64 {
    let factor = match arch {
        Architecture::Distributed => 4.0,
        Architecture::Shared => 2.0,
    };
    1.0 / (factor * smoothness * (max_delay as f64 + 1.0))
}
