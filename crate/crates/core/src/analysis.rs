//! Closed-form theory: descent coefficients, predicted gradient bounds,
//! oracle-call counts and uniform-stability bounds.
//!
//! Everything here is a pure function of [`TheoryInputs`].

use alloc::format;

use crate::config::{auto_epoch_len, auto_step, Architecture};
use crate::error::{invalid, Error, Result};

/// Problem and run constants the formulas are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    /// Smoothness `L`.
    pub smoothness: f64,
    /// Per-sample gradient bound `M`.
    pub grad_bound: f64,
    /// Strong convexity `μ` (0 when unknown or non-convex).
    pub strong_convexity: f64,
    pub n: usize,
    pub epoch_len: usize,
    pub batch: usize,
    pub iterations: usize,
    pub workers: usize,
    pub max_delay: usize,
    pub dim: usize,
    pub step: f64,
    /// `f(x₀) − f*`.
    pub f_gap: f64,
    /// Bound on the estimator error at epoch boundaries. Syncs compute
    /// exact full gradients, so only 0 is accepted.
    pub eps1: f64,
}

impl TheoryInputs {
    fn delay(&self) -> f64 {
        self.max_delay as f64
    }

    /// `Δ² + q(Δ+1)/|S|`
    fn staleness_factor(&self) -> f64 {
        let delta = self.delay();
        delta * delta + self.epoch_len as f64 * (delta + 1.0) / self.batch as f64
    }

    fn check(&self) -> Result<()> {
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return Err(invalid("L", "must be finite and positive"));
        }
        if self.batch == 0 || self.epoch_len == 0 || self.iterations == 0 || self.n == 0 {
            return Err(invalid("inputs", "N, q, |S| and K must be positive"));
        }
        if !(self.step > 0.0) {
            return Err(invalid("eta", "must be positive"));
        }
        if self.eps1 != 0.0 {
            return Err(invalid("eps1", "only exact epoch-boundary gradients are modelled"));
        }
        Ok(())
    }
}

/// Uniform-stability regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    /// Strongly convex quadratic.
    Quadratic,
    Nonconvex,
}

impl Convexity {
    pub fn name(self) -> &'static str {
        match self {
            Convexity::Quadratic => "quadratic-sc",
            Convexity::Nonconvex => "nonconvex",
        }
    }
}

/// `η/2 − Lη²/2 − L²η³(q(Δ+1)/|S| + Δ²)`. Positive values certify descent.
pub fn beta1_dm(t: &TheoryInputs) -> f64 {
    let (l, eta) = (t.smoothness, t.step);
    eta / 2.0 - l * eta * eta / 2.0 - l * l * eta * eta * eta * t.staleness_factor()
}

/// `η/(2d) − Lη²/(2d) − L²η³/d² · (q(Δ+1)/|S| + Δ²)`.
pub fn beta1_sm(t: &TheoryInputs) -> f64 {
    let (l, eta, d) = (t.smoothness, t.step, t.dim as f64);
    eta / (2.0 * d) - l * eta * eta / (2.0 * d) - l * l * eta * eta * eta / (d * d) * t.staleness_factor()
}

/// Generic distributed-memory bound on `E‖∇f(x_ζ)‖²` for any `η` with
/// `β₁ > 0`: `[4L²(Δ² + q(Δ+1)/|S|)η² + 2] f_gap / (Kβ₁)`.
pub fn grad_bound_dm(t: &TheoryInputs) -> Result<f64> {
    t.check()?;
    let b = beta1_dm(t);
    if b <= 0.0 {
        return Err(Error::Hypothesis(format!("beta1_dm = {b:e} is not positive")));
    }
    let l = t.smoothness;
    let k = t.iterations as f64;
    let lead = 4.0 * l * l * t.staleness_factor() * t.step * t.step;
    Ok((lead / (k * b) + 2.0 / (k * b)) * t.f_gap)
}

/// Shared-memory analogue of [`grad_bound_dm`]:
/// `[4L²(Δ² + q(Δ+1)/|S|)η²/d + 2] f_gap / (Kβ₁)`.
pub fn grad_bound_sm(t: &TheoryInputs) -> Result<f64> {
    t.check()?;
    let b = beta1_sm(t);
    if b <= 0.0 {
        return Err(Error::Hypothesis(format!("beta1_sm = {b:e} is not positive")));
    }
    let l = t.smoothness;
    let k = t.iterations as f64;
    let d = t.dim as f64;
    let lead = 4.0 * l * l * t.staleness_factor() * t.step * t.step / d;
    Ok((lead / (k * b) + 2.0 / (k * b)) * t.f_gap)
}

fn check_rule(t: &TheoryInputs, arch: Architecture) -> Result<()> {
    t.check()?;
    let want = auto_step(arch, t.smoothness, t.max_delay);
    if (t.step - want).abs() > 1e-9 * want {
        return Err(Error::Hypothesis(format!("eta = {} but the step rule gives {want}", t.step)));
    }
    if t.epoch_len != t.batch {
        return Err(Error::Hypothesis(format!("q = {} differs from |S| = {}", t.epoch_len, t.batch)));
    }
    let root = libm::sqrt(t.n as f64);
    if (t.batch as f64 - root).abs() > 1.0 && t.batch != auto_epoch_len(t.n) {
        return Err(Error::Hypothesis(format!("|S| = {} is not sqrt(N) for N = {}", t.batch, t.n)));
    }
    if arch == Architecture::Shared && t.dim == 0 {
        return Err(invalid("d", "must be positive"));
    }
    Ok(())
}

/// `16L(Δ+1)(9Δ²+17Δ+9) f_gap / (K(7Δ²+13Δ+5))`, valid under
/// `η = 1/(4L(Δ+1))` and `q = |S| ≈ √N`.
pub fn predicted_grad_bound_dm(t: &TheoryInputs) -> Result<f64> {
    check_rule(t, Architecture::Distributed)?;
    let delta = t.delay();
    let num = 16.0 * t.smoothness * (delta + 1.0) * (9.0 * delta * delta + 17.0 * delta + 9.0);
    let den = t.iterations as f64 * (7.0 * delta * delta + 13.0 * delta + 5.0);
    Ok(num / den * t.f_gap)
}

/// Shared-memory closed form under `η = 1/(2L(Δ+1))` and `q = |S| ≈ √N`:
/// `8Ld(Δ+1)(2d(Δ+1)² + Δ²+Δ+1) f_gap / (K(2d(Δ+1)² − d(Δ+1) − (Δ²+Δ+1)))`.
pub fn predicted_grad_bound_sm(t: &TheoryInputs) -> Result<f64> {
    check_rule(t, Architecture::Shared)?;
    let delta = t.delay();
    let d = t.dim as f64;
    let a = delta + 1.0;
    let c = delta * delta + delta + 1.0;
    let den = t.iterations as f64 * (2.0 * d * a * a - d * a - c);
    if den <= 0.0 {
        return Err(Error::Hypothesis(format!("d = {} too small for a positive descent coefficient", t.dim)));
    }
    Ok(8.0 * t.smoothness * d * a * (2.0 * d * a * a + c) / den * t.f_gap)
}

/// Predicted bound for either architecture under its step rule.
pub fn predicted_grad_bound(arch: Architecture, t: &TheoryInputs) -> Result<f64> {
    match arch {
        Architecture::Distributed => predicted_grad_bound_dm(t),
        Architecture::Shared => predicted_grad_bound_sm(t),
    }
}

/// Smallest `K` whose predicted bound is at most `target`.
pub fn iterations_for(arch: Architecture, t: &TheoryInputs, target: f64) -> Result<usize> {
    if !(target > 0.0) {
        return Err(invalid("target", "must be positive"));
    }
    let one = TheoryInputs { iterations: 1, ..*t };
    let per_k = predicted_grad_bound(arch, &one)?;
    Ok(libm::ceil(per_k / target).max(1.0) as usize)
}

/// `⌈K/q⌉N + K·batch`
pub fn sfo_paper(k: usize, q: usize, n: usize, batch: usize) -> Result<u64> {
    if batch == 0 {
        return Err(invalid("batch", "must be at least 1"));
    }
    if q == 0 {
        return Err(invalid("q", "must be at least 1"));
    }
    Ok((k.div_ceil(q) * n + k * batch) as u64)
}

/// Loss-level uniform-stability bound with linear dependence on `K`.
///
/// | arch | quadratic-sc | nonconvex |
/// |------|--------------|-----------|
/// | dm   | `2ηM²K/N`    | `2ηM²K + 2ηM²K/N` |
/// | sm   | dm / `√d`    | dm / `√d` |
pub fn stability_bound(arch: Architecture, convexity: Convexity, eta: f64, m: f64, k: usize, n: usize, d: usize) -> f64 {
    let base = 2.0 * eta * m * m * k as f64;
    let dm = match convexity {
        Convexity::Quadratic => base / n as f64,
        Convexity::Nonconvex => base + base / n as f64,
    };
    scale_sm(arch, dm, d)
}

/// Variant with `K²` in place of `K` in the nonconvex case. Reported
/// alongside [`stability_bound`].
pub fn stability_bound_k2(arch: Architecture, convexity: Convexity, eta: f64, m: f64, k: usize, n: usize, d: usize) -> f64 {
    match convexity {
        Convexity::Quadratic => stability_bound(arch, convexity, eta, m, k, n, d),
        Convexity::Nonconvex => {
            let base = 2.0 * eta * m * m * (k as f64) * (k as f64);
            scale_sm(arch, base + base / n as f64, d)
        }
    }
}

/// Iterate-level bound on `‖δ_K‖`: the loss bound divided by `M`
/// (`2ηMK/N` for dm quadratics).
pub fn delta_bound(arch: Architecture, convexity: Convexity, eta: f64, m: f64, k: usize, n: usize, d: usize) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    stability_bound(arch, convexity, eta, m, k, n, d) / m
}

fn scale_sm(arch: Architecture, v: f64, d: usize) -> f64 {
    match arch {
        Architecture::Distributed => v,
        Architecture::Shared => v / libm::sqrt(d.max(1) as f64),
    }
}

/// Every theory quantity for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheorySummary {
    pub beta1_dm: f64,
    pub beta1_sm: f64,
    pub step_rule: f64,
    /// Closed form under the step rule, `None` when its hypothesis fails.
    pub predicted_bound: Option<f64>,
    /// Descent bound at the configured `η`, `None` when `β₁ ≤ 0`.
    pub generic_bound: Option<f64>,
    pub sfo_paper: u64,
    pub sfo_outer: u64,
    pub sfo_inner: u64,
}

pub fn summary(arch: Architecture, t: &TheoryInputs) -> Result<TheorySummary> {
    t.check()?;
    let generic = match arch {
        Architecture::Distributed => grad_bound_dm(t),
        Architecture::Shared => grad_bound_sm(t),
    };
    Ok(TheorySummary {
        beta1_dm: beta1_dm(t),
        beta1_sm: beta1_sm(t),
        step_rule: auto_step(arch, t.smoothness, t.max_delay),
        predicted_bound: predicted_grad_bound(arch, t).ok(),
        generic_bound: generic.ok(),
        sfo_paper: sfo_paper(t.iterations, t.epoch_len, t.n, t.batch)?,
        sfo_outer: (t.iterations.div_ceil(t.epoch_len) * t.n) as u64,
        sfo_inner: (t.iterations * t.batch) as u64,
    })
}
