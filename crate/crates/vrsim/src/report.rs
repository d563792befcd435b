//! Trace CSV, run summaries and theory reports.

use serde::Serialize;
use vrsim_core::analysis::{self, Convexity, TheoryInputs};
use vrsim_core::engine::initial_point;
use vrsim_core::trace::Trace;
use vrsim_core::{Algorithm, Architecture, ModelKind};

use crate::config::Experiment;
use crate::error::{CliError, Result};

pub const TRACE_HEADER: [&str; 9] = ["k", "epoch", "loss", "grad_norm_sq", "worker", "tau", "sfo_paper", "sfo_true", "sync"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Serializes the evaluation grid of `trace`. Shared-memory traces gain an
/// `m_k` column and, with `with_algorithm`, every row names its algorithm.
pub fn trace_csv(trace: &Trace, with_algorithm: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let shared = trace.architecture == Architecture::Shared;
    let mut header: Vec<&str> = TRACE_HEADER.to_vec();
    if shared {
        header.push("m_k");
    }
    if with_algorithm {
        header.push("algorithm");
    }
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for g in &trace.grid {
        let step = trace.steps.get(g.k);
        let mut row = vec![
            g.k.to_string(),
            g.epoch.to_string(),
            format!("{:?}", g.loss),
            format!("{:?}", g.grad_norm_sq),
            opt(step.and_then(|s| s.worker)),
            opt(step.and_then(|s| s.tau)),
            g.sfo.analytic.to_string(),
            g.sfo.true_evals.to_string(),
            opt(step.map(|s| u8::from(s.sync))),
        ];
        if shared {
            row.push(opt(step.and_then(|s| s.coord)));
        }
        if with_algorithm {
            row.push(trace.algorithm.name().to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let mut out = String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?).expect("utf-8 csv");
    out.push_str(&format!(
        "# zeta={} grad_norm_sq_at_zeta={:?} max_tau={}\n",
        trace.zeta, trace.grad_norm_sq_at_zeta, trace.max_tau
    ));
    Ok(out)
}

/// Theory inputs for an experiment, with `f(x₀) − f*` from the model's
/// optimum (exact for quadratics).
pub fn theory_inputs(e: &Experiment) -> Result<(TheoryInputs, bool)> {
    let samples = e.data.samples();
    let x0 = initial_point(&e.cfg, e.model.dim())?;
    let f0 = e.model.full_loss(&x0, samples)?;
    let opt = e.model.optimum(samples, e.section.reference_iters)?;
    let inputs = TheoryInputs {
        smoothness: e.constants.smoothness,
        grad_bound: e.constants.grad_bound,
        strong_convexity: e.constants.strong_convexity,
        n: e.data.len(),
        epoch_len: e.cfg.epoch_len,
        batch: e.cfg.batch,
        iterations: e.cfg.iterations,
        workers: e.cfg.workers,
        max_delay: e.cfg.max_delay,
        dim: e.model.dim(),
        step: e.cfg.step,
        f_gap: (f0 - opt.value).max(0.0),
        eps1: 0.0,
    };
    Ok((inputs, opt.exact))
}

fn beta1(arch: Architecture, t: &TheoryInputs) -> f64 {
    match arch {
        Architecture::Distributed => analysis::beta1_dm(t),
        Architecture::Shared => analysis::beta1_sm(t),
    }
}

/// Closed form under the step rule when its hypothesis holds, otherwise the
/// generic descent-lemma bound when `β₁ > 0`.
fn bound(arch: Architecture, t: &TheoryInputs) -> (Option<f64>, &'static str) {
    if let Ok(b) = analysis::predicted_grad_bound(arch, t) {
        return (Some(b), "closed-form");
    }
    let generic = match arch {
        Architecture::Distributed => analysis::grad_bound_dm(t),
        Architecture::Shared => analysis::grad_bound_sm(t),
    };
    match generic {
        Ok(b) => (Some(b), "descent-lemma"),
        Err(_) => (None, "none"),
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub algorithm: &'static str,
    pub architecture: &'static str,
    pub model: &'static str,
    pub config_hash: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub q: usize,
    pub batch: usize,
    pub eta: f64,
    pub workers: usize,
    pub delta: usize,
    pub delay_mode: &'static str,
    pub final_loss: f64,
    pub grad_norm_sq_at_zeta: f64,
    pub zeta: usize,
    pub sfo_paper: u64,
    pub sfo_true: u64,
    pub max_tau: usize,
    pub interruptions: usize,
    pub redraws: usize,
    pub beta1: f64,
    pub predicted_bound: Option<f64>,
    pub bound_kind: &'static str,
    pub measured_le_predicted: Option<bool>,
    pub smoothness: f64,
    pub grad_bound: f64,
    pub f_gap: f64,
    pub f_gap_exact: bool,
    pub warnings: Vec<String>,
}

pub fn summary(e: &Experiment, trace: &Trace, config_hash: &str) -> Result<Summary> {
    let (t, exact) = theory_inputs(e)?;
    let (predicted, kind) = if trace.algorithm == Algorithm::Synthesis { bound(e.arch, &t) } else { (None, "none") };
    Ok(Summary {
        algorithm: trace.algorithm.name(),
        architecture: e.arch.name(),
        model: e.model.kind().name(),
        config_hash: config_hash.to_string(),
        seed: e.cfg.seed,
        n: e.data.len(),
        d: e.model.dim(),
        k: e.cfg.iterations,
        q: e.cfg.epoch_len,
        batch: e.cfg.batch,
        eta: e.cfg.step,
        workers: e.cfg.workers,
        delta: e.cfg.max_delay,
        delay_mode: e.cfg.delay_mode.name(),
        final_loss: trace.final_loss,
        grad_norm_sq_at_zeta: trace.grad_norm_sq_at_zeta,
        zeta: trace.zeta,
        sfo_paper: trace.sfo.analytic,
        sfo_true: trace.sfo.true_evals,
        max_tau: trace.max_tau,
        interruptions: trace.interruptions.len(),
        redraws: trace.redraws,
        beta1: beta1(e.arch, &t),
        predicted_bound: predicted,
        bound_kind: kind,
        measured_le_predicted: predicted.map(|p| trace.grad_norm_sq_at_zeta <= p),
        smoothness: t.smoothness,
        grad_bound: t.grad_bound,
        f_gap: t.f_gap,
        f_gap_exact: exact,
        warnings: trace.warnings.clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct StabilityBounds {
    pub convexity: &'static str,
    pub loss_bound: f64,
    pub loss_bound_k_squared: f64,
    pub delta_bound: f64,
}

#[derive(Debug, Serialize)]
pub struct TheoryReport {
    pub architecture: &'static str,
    pub model: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub q: usize,
    pub batch: usize,
    pub workers: usize,
    pub delta: usize,
    pub eta: f64,
    pub smoothness: f64,
    pub grad_bound: f64,
    pub strong_convexity: f64,
    pub constants_approximate: bool,
    pub f_gap: f64,
    pub f_gap_exact: bool,
    pub beta1_dm: f64,
    pub beta1_sm: f64,
    pub beta1_positive: bool,
    pub step_rule: f64,
    pub predicted_bound: Option<f64>,
    pub bound_kind: &'static str,
    pub sfo_paper: u64,
    pub sfo_outer: u64,
    pub sfo_inner: u64,
    pub stability: StabilityBounds,
}

pub fn theory(e: &Experiment) -> Result<TheoryReport> {
    let (t, exact) = theory_inputs(e)?;
    let s = analysis::summary(e.arch, &t)?;
    let (predicted, kind) = bound(e.arch, &t);
    let convexity = if e.model.kind() == ModelKind::Quadratic && t.strong_convexity > 0.0 {
        Convexity::Quadratic
    } else {
        Convexity::Nonconvex
    };
    let args = (e.arch, convexity, t.step, t.grad_bound, t.iterations, t.n, t.dim);
    Ok(TheoryReport {
        architecture: e.arch.name(),
        model: e.model.kind().name(),
        n: t.n,
        d: t.dim,
        k: t.iterations,
        q: t.epoch_len,
        batch: t.batch,
        workers: t.workers,
        delta: t.max_delay,
        eta: t.step,
        smoothness: t.smoothness,
        grad_bound: t.grad_bound,
        strong_convexity: t.strong_convexity,
        constants_approximate: e.constants.approximate,
        f_gap: t.f_gap,
        f_gap_exact: exact,
        beta1_dm: s.beta1_dm,
        beta1_sm: s.beta1_sm,
        beta1_positive: beta1(e.arch, &t) > 0.0,
        step_rule: s.step_rule,
        predicted_bound: predicted,
        bound_kind: kind,
        sfo_paper: s.sfo_paper,
        sfo_outer: s.sfo_outer,
        sfo_inner: s.sfo_inner,
        stability: StabilityBounds {
            convexity: convexity.name(),
            loss_bound: analysis::stability_bound(args.0, args.1, args.2, args.3, args.4, args.5, args.6),
            loss_bound_k_squared: analysis::stability_bound_k2(args.0, args.1, args.2, args.3, args.4, args.5, args.6),
            delta_bound: analysis::delta_bound(args.0, args.1, args.2, args.3, args.4, args.5, args.6),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrsim_core::data::{synthesize, SynthKind};
    use vrsim_core::dm_sim::run_synthesis_dm;
    use vrsim_core::sm_sim::run_synthesis_sm;
    use vrsim_core::{ObjectiveModel, RunConfig, SymMatrix};

    #[test]
    fn trace_layout() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 25, 2, 1).unwrap();
        let model = ObjectiveModel::quadratic(SymMatrix::identity(2)).unwrap();
        let cfg = RunConfig::new(1, 0, 5, 5, 0.1, 10, 3);
        let t = run_synthesis_dm(&cfg, &model, &data).unwrap();
        let text = trace_csv(&t, false).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,epoch,loss,grad_norm_sq,worker,tau,sfo_paper,sfo_true,sync");
        assert_eq!(lines.len(), 1 + 11 + 1);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[1].ends_with(",,,30,25,1"));
        assert!(lines[2].ends_with(",0,0,35,35,0"));
        assert!(lines.last().unwrap().starts_with("# zeta="));
        assert!(lines[11].starts_with("10,2,"));

        let s = run_synthesis_sm(&cfg, &model, &data).unwrap();
        let text = trace_csv(&s, true).unwrap();
        assert!(text.starts_with("k,epoch,loss,grad_norm_sq,worker,tau,sfo_paper,sfo_true,sync,m_k,algorithm\n"));
    }
}
