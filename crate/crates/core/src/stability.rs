//! Coupled runs on adjacent datasets.
//!
//! Both runs share every random stream, so they draw the same batch indices,
//! delays, coordinates and output index. The only difference is the content
//! of the last sample, which the second run sees whenever its index is drawn.

use alloc::vec::Vec;

use rand::Rng;

use crate::analysis::{self, Convexity};
use crate::config::{Algorithm, Architecture, RunConfig};
use crate::data::{make_adjacent, Dataset};
use crate::engine::simulate;
use crate::error::{invalid, Result};
use crate::objective::{ModelKind, ObjectiveModel, Sample};
use crate::rng::{stream, Stream};
use crate::trace::StepRecord;
use crate::vector;

/// Size of the probe set used for the sup-over-samples loss difference.
pub const PROBE_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub algorithm: Algorithm,
    pub architecture: Architecture,
    pub step: f64,
    pub n: usize,
    pub iterations: usize,
    pub dim: usize,
    pub max_delay: usize,
    pub seed: u64,
    /// `‖x_K − x′_K‖`
    pub delta_norm: f64,
    /// `‖δ_K‖ / max(1, ‖x_K‖)`
    pub normalized_delta_norm: f64,
    /// `‖δ_k‖` at every evaluation-grid point, ending at `k = K`.
    pub delta_path: Vec<(usize, f64)>,
    /// Largest single-iteration change of `δ`.
    pub max_step_perturbation: f64,
    /// Gradient bound `M` over both datasets.
    pub grad_bound: f64,
    /// `M‖δ_K‖`
    pub loss_proxy: f64,
    /// `max_ξ |f(x_K, ξ) − f(x′_K, ξ)|` over the probe set.
    pub sup_loss_diff: f64,
    pub convexity: Convexity,
    /// Iterate-level bound the measurement is compared against.
    pub bound: f64,
    /// Loss-level bound, linear in `K`.
    pub loss_bound: f64,
    /// Loss-level bound with `K²` in the nonconvex case.
    pub loss_bound_k2: f64,
    pub within_bound: bool,
}

fn convexity_of(model: &ObjectiveModel, mu: f64) -> Convexity {
    match model.kind() {
        ModelKind::Quadratic if mu > 0.0 => Convexity::Quadratic,
        _ => Convexity::Nonconvex,
    }
}

/// Runs `algo` on `data` and on its adjacent copy with shared randomness.
/// The adjacent dataset uses `cfg.seed` for the replacement draw.
pub fn coupled_run(
    algo: Algorithm,
    arch: Architecture,
    cfg: &RunConfig,
    model: &ObjectiveModel,
    data: &Dataset,
    probe: Option<&[Sample]>,
) -> Result<StabilityReport> {
    if data.len() < 2 {
        return Err(invalid("N", "coupled runs need at least two samples"));
    }
    let other = make_adjacent(data, cfg.seed)?;
    coupled_pair(algo, arch, cfg, model, data, &other, probe)
}

/// Same as [`coupled_run`] with an explicit second dataset. Passing `data`
/// twice is the coupling self-test: every iterate pair must coincide.
pub fn coupled_pair(
    algo: Algorithm,
    arch: Architecture,
    cfg: &RunConfig,
    model: &ObjectiveModel,
    data: &Dataset,
    other: &Dataset,
    probe: Option<&[Sample]>,
) -> Result<StabilityReport> {
    if data.len() != other.len() {
        return Err(invalid("S'", "adjacent datasets must have the same size"));
    }
    let d = model.dim();
    let k_total = cfg.iterations;
    let stride = cfg.grid_stride();

    let mut path: Vec<f64> = Vec::with_capacity(k_total * d);
    let mut record = |_k: usize, x: &[f64], _v: &[f64], _s: &StepRecord| path.extend_from_slice(x);
    let first = simulate(algo, arch, cfg, model, data, &mut record)?;

    let mut delta_path = Vec::with_capacity(k_total / stride + 2);
    let mut prev_delta: Option<Vec<f64>> = None;
    let mut max_step = 0.0f64;
    let mut compare = |k: usize, x: &[f64], _v: &[f64], _s: &StepRecord| {
        let x1 = &path[k * d..(k + 1) * d];
        let delta: Vec<f64> = x1.iter().zip(x).map(|(a, b)| a - b).collect();
        if k % stride == 0 {
            delta_path.push((k, vector::norm(&delta)));
        }
        if let Some(p) = &prev_delta {
            max_step = max_step.max(vector::distance(p, &delta));
        }
        prev_delta = Some(delta);
    };
    let second = simulate(algo, arch, cfg, model, other, &mut compare)?;

    let final_delta: Vec<f64> = first.x_final.iter().zip(second.x_final.iter()).map(|(a, b)| a - b).collect();
    if let Some(p) = &prev_delta {
        max_step = max_step.max(vector::distance(p, &final_delta));
    }
    let delta_norm = vector::norm(&final_delta);
    delta_path.push((k_total, delta_norm));

    let c1 = model.lipschitz_estimate(data.samples(), None)?;
    let c2 = model.lipschitz_estimate(other.samples(), None)?;
    let m = c1.grad_bound.max(c2.grad_bound);
    let convexity = convexity_of(model, c1.strong_convexity.min(c2.strong_convexity));
    let n = data.len();

    let drawn;
    let probe = match probe {
        Some(p) => p,
        None => {
            let mut rng = stream(cfg.seed.wrapping_add(1), Stream::Adjacent);
            drawn = (0..PROBE_SIZE)
                .map(|_| data.samples()[rng.gen_range(0..n)].clone())
                .collect::<Vec<_>>();
            &drawn
        }
    };
    let mut sup_loss_diff = 0.0f64;
    for s in probe {
        let a = model.loss(&first.x_final, s)?;
        let b = model.loss(&second.x_final, s)?;
        sup_loss_diff = sup_loss_diff.max((a - b).abs());
    }

    let bound = analysis::delta_bound(arch, convexity, cfg.step, m, k_total, n, d);
    Ok(StabilityReport {
        algorithm: algo,
        architecture: arch,
        step: cfg.step,
        n,
        iterations: k_total,
        dim: d,
        max_delay: cfg.max_delay,
        seed: cfg.seed,
        delta_norm,
        normalized_delta_norm: delta_norm / first.x_final.norm().max(1.0),
        delta_path,
        max_step_perturbation: max_step,
        grad_bound: m,
        loss_proxy: m * delta_norm,
        sup_loss_diff,
        convexity,
        bound,
        loss_bound: analysis::stability_bound(arch, convexity, cfg.step, m, k_total, n, d),
        loss_bound_k2: analysis::stability_bound_k2(arch, convexity, cfg.step, m, k_total, n, d),
        within_bound: delta_norm <= bound,
    })
}

/// One stability experiment: an architecture, a configuration template and
/// the data it runs on.
#[derive(Debug, Clone, Copy)]
pub struct StabilitySetup<'a> {
    pub architecture: Architecture,
    pub config: &'a RunConfig,
    pub model: &'a ObjectiveModel,
    pub data: &'a Dataset,
}

/// Aggregate over seeds for one `(algorithm, architecture)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub algorithm: Algorithm,
    pub architecture: Architecture,
    pub step: f64,
    pub n: usize,
    pub iterations: usize,
    pub max_delay: usize,
    pub mean_delta_norm: f64,
    /// Standard error of the mean over seeds.
    pub stderr: f64,
    pub mean_normalized_delta_norm: f64,
    pub bound: f64,
    /// Every seed's `‖δ_K‖` is within the bound.
    pub within_bound: bool,
    /// `‖δ_k‖` on the evaluation grid, averaged over seeds.
    pub mean_delta_path: Vec<(usize, f64)>,
    pub seeds: Vec<u64>,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// One row per `(setup, algorithm)`, each averaged over `seeds`.
pub fn stability_table(setups: &[StabilitySetup<'_>], algorithms: &[Algorithm], seeds: &[u64]) -> Result<Vec<StabilityRow>> {
    if setups.is_empty() {
        return Err(invalid("configs", "at least one configuration is required"));
    }
    if algorithms.is_empty() {
        return Err(invalid("algorithms", "at least one algorithm is required"));
    }
    if seeds.is_empty() {
        return Err(invalid("seeds", "at least one seed is required"));
    }
    let mut rows = Vec::new();
    for setup in setups {
        for &algo in algorithms {
            let mut raw = Vec::with_capacity(seeds.len());
            let mut normalized = Vec::with_capacity(seeds.len());
            let mut bound = 0.0f64;
            let mut within = true;
            let mut path: Vec<(usize, f64)> = Vec::new();
            for &seed in seeds {
                let cfg = RunConfig { seed, ..setup.config.clone() };
                let r = coupled_run(algo, setup.architecture, &cfg, setup.model, setup.data, None)?;
                if path.is_empty() {
                    path = r.delta_path.iter().map(|(k, _)| (*k, 0.0)).collect();
                }
                for (acc, (_, v)) in path.iter_mut().zip(&r.delta_path) {
                    acc.1 += v / seeds.len() as f64;
                }
                raw.push(r.delta_norm);
                normalized.push(r.normalized_delta_norm);
                bound = bound.max(r.bound);
                within &= r.within_bound;
            }
            let (mean, stderr) = mean_stderr(&raw);
            rows.push(StabilityRow {
                algorithm: algo,
                architecture: setup.architecture,
                step: setup.config.step,
                n: setup.data.len(),
                iterations: setup.config.iterations,
                max_delay: setup.config.max_delay,
                mean_delta_norm: mean,
                stderr,
                mean_normalized_delta_norm: mean_stderr(&normalized).0,
                bound,
                within_bound: within,
                mean_delta_path: path,
                seeds: seeds.to_vec(),
            });
        }
    }
    Ok(rows)
}
