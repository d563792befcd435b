//! Loss families with per-sample value and gradient oracles.
//!
//! Three kinds are supported:
//!
//! * `quadratic`: `f_i(x) = ½ (x - c_i)ᵀ A (x - c_i)` with a symmetric PSD
//!   matrix `A` shared by all samples and a per-sample center `c_i`
//!   (stored in [`Sample::features`]).
//! * `logistic`: binary cross-entropy on a linear score `wᵀu` with labels in
//!   `{0, 1}` plus an optional `reg/2 ‖w‖²` penalty.
//! * `mlp`: `input → 32 (ReLU) → classes (softmax cross-entropy)`, weights
//!   flattened as `[W1 | b1 | W2 | b2]` with row-major matrices.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{invalid, Error, Result};
use crate::linalg::SymMatrix;
use crate::vector::{self, ParamVector};

/// Hidden width of the MLP kind.
pub const MLP_HIDDEN: usize = 32;

/// One training example. Quadratic models read `features` as the center
/// `c_i`; logistic and MLP models read `features` as the input and `label`
/// as the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Sample { features, label }
    }

    pub fn center(center: Vec<f64>) -> Self {
        Sample {
            features: center,
            label: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Quadratic,
    Logistic,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Quadratic => "quadratic",
            ModelKind::Logistic => "logistic",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Quadratic { a: SymMatrix },
    Logistic { reg: f64 },
    Mlp { classes: usize },
}

/// A loss family together with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveModel {
    model: Model,
    input_dim: usize,
    dim: usize,
}

/// Smoothness and gradient-bound constants used for step-size selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Gradient Lipschitz constant `L`.
    pub smoothness: f64,
    /// Bound `M` on per-sample gradient norms.
    pub grad_bound: f64,
    /// Strong-convexity modulus `μ` (0 for non-convex kinds).
    pub strong_convexity: f64,
    /// True when the constants are empirical estimates rather than exact.
    pub approximate: bool,
}

/// Optimal value `f*`, exact for quadratics and estimated otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub value: f64,
    pub point: ParamVector,
    pub exact: bool,
}

impl ObjectiveModel {
    /// Quadratic family with shared curvature `a`.
    pub fn quadratic(a: SymMatrix) -> Result<Self> {
        let ev = a.eigenvalues();
        if ev.first().copied().unwrap_or(0.0) < -1e-12 {
            return Err(invalid("A", "matrix is not positive semi-definite"));
        }
        if ev.last().copied().unwrap_or(0.0) <= 0.0 {
            return Err(invalid("A", "matrix has no positive eigenvalue"));
        }
        let d = a.dim();
        Ok(ObjectiveModel {
            model: Model::Quadratic { a },
            input_dim: d,
            dim: d,
        })
    }

    pub fn logistic(input_dim: usize, reg: f64) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(invalid("reg", "must be finite and non-negative"));
        }
        Ok(ObjectiveModel {
            model: Model::Logistic { reg },
            input_dim,
            dim: input_dim,
        })
    }

    pub fn mlp(input_dim: usize, classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if classes < 2 {
            return Err(invalid("classes", "must be at least 2"));
        }
        let dim = MLP_HIDDEN * input_dim + MLP_HIDDEN + classes * MLP_HIDDEN + classes;
        Ok(ObjectiveModel {
            model: Model::Mlp { classes },
            input_dim,
            dim,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.model {
            Model::Quadratic { .. } => ModelKind::Quadratic,
            Model::Logistic { .. } => ModelKind::Logistic,
            Model::Mlp { .. } => ModelKind::Mlp,
        }
    }

    /// Dimension `d` of the parameter vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Expected length of [`Sample::features`].
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn curvature(&self) -> Option<&SymMatrix> {
        match &self.model {
            Model::Quadratic { a } => Some(a),
            _ => None,
        }
    }

    fn check(&self, x: &[f64], sample: &Sample) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if sample.features.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: sample.features.len(),
            });
        }
        if let Model::Mlp { classes } = self.model {
            class_index(sample.label, classes)?;
        }
        Ok(())
    }

    /// Checks every sample of a dataset against the model shape.
    pub fn check_dataset(&self, samples: &[Sample]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let probe = vec![0.0; self.dim];
        samples.iter().try_for_each(|s| self.check(&probe, s))
    }

    /// Per-sample loss `f(x, ξ)`.
    pub fn loss(&self, x: &[f64], sample: &Sample) -> Result<f64> {
        self.check(x, sample)?;
        Ok(self.loss_unchecked(x, sample))
    }

    /// Per-sample gradient `∇f(x, ξ)`.
    pub fn grad(&self, x: &[f64], sample: &Sample) -> Result<ParamVector> {
        self.check(x, sample)?;
        let mut out = ParamVector::zeros(self.dim);
        self.grad_into(x, sample, &mut out);
        Ok(out)
    }

    /// Mean of per-sample gradients, summed in ascending sample order.
    pub fn full_grad(&self, x: &[f64], samples: &[Sample]) -> Result<ParamVector> {
        self.check_dataset(samples)?;
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut sum = self.grad_sum(x, samples);
        let n = samples.len() as f64;
        sum.iter_mut().for_each(|v| *v /= n);
        Ok(sum)
    }

    /// Mean loss over a dataset.
    pub fn full_loss(&self, x: &[f64], samples: &[Sample]) -> Result<f64> {
        self.check_dataset(samples)?;
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let total: f64 = samples.iter().map(|s| self.loss_unchecked(x, s)).sum();
        Ok(total / samples.len() as f64)
    }

    /// Sum (not mean) of per-sample gradients in slice order. Shapes are
    /// assumed already validated.
    pub(crate) fn grad_sum(&self, x: &[f64], samples: &[Sample]) -> ParamVector {
        let mut sum = ParamVector::zeros(self.dim);
        let mut g = ParamVector::zeros(self.dim);
        for s in samples {
            self.grad_into(x, s, &mut g);
            for (acc, gi) in sum.iter_mut().zip(g.iter()) {
                *acc += gi;
            }
        }
        sum
    }

    /// Sum of per-sample gradients over `indices`, in index-list order.
    pub(crate) fn grad_sum_indexed(&self, x: &[f64], samples: &[Sample], indices: &[usize]) -> ParamVector {
        let mut sum = ParamVector::zeros(self.dim);
        let mut g = ParamVector::zeros(self.dim);
        for &i in indices {
            self.grad_into(x, &samples[i], &mut g);
            for (acc, gi) in sum.iter_mut().zip(g.iter()) {
                *acc += gi;
            }
        }
        sum
    }

    pub(crate) fn loss_unchecked(&self, x: &[f64], sample: &Sample) -> f64 {
        match &self.model {
            Model::Quadratic { a } => {
                let diff: Vec<f64> = x.iter().zip(&sample.features).map(|(a, b)| a - b).collect();
                let ad = a.mul_vec(&diff);
                0.5 * vector::dot(&diff, &ad)
            }
            Model::Logistic { reg } => {
                let z = vector::dot(x, &sample.features);
                softplus(z) - sample.label * z + 0.5 * reg * vector::norm_sq(x)
            }
            Model::Mlp { classes } => {
                let fwd = self.mlp_forward(x, &sample.features, *classes);
                let y = class_index(sample.label, *classes).unwrap_or(0);
                fwd.log_sum_exp - fwd.logits[y]
            }
        }
    }

    /// Writes `∇f(x, ξ)` into `out`. Shapes are assumed already validated.
    pub(crate) fn grad_into(&self, x: &[f64], sample: &Sample, out: &mut [f64]) {
        match &self.model {
            Model::Quadratic { a } => {
                let diff: Vec<f64> = x.iter().zip(&sample.features).map(|(a, b)| a - b).collect();
                a.mul_vec_into(&diff, out);
            }
            Model::Logistic { reg } => {
                let u = &sample.features;
                let r = sigmoid(vector::dot(x, u)) - sample.label;
                for ((o, ui), xi) in out.iter_mut().zip(u).zip(x) {
                    *o = r * ui + reg * xi;
                }
            }
            Model::Mlp { classes } => self.mlp_backward(x, sample, *classes, out),
        }
    }

    fn mlp_layout(&self, classes: usize) -> MlpLayout {
        let h = MLP_HIDDEN;
        let w1 = 0;
        let b1 = w1 + h * self.input_dim;
        let w2 = b1 + h;
        let b2 = w2 + classes * h;
        MlpLayout { w1, b1, w2, b2 }
    }

    fn mlp_forward(&self, x: &[f64], u: &[f64], classes: usize) -> MlpForward {
        let lay = self.mlp_layout(classes);
        let h = MLP_HIDDEN;
        let din = self.input_dim;
        let mut pre = vec![0.0; h];
        for (j, p) in pre.iter_mut().enumerate() {
            let row = &x[lay.w1 + j * din..lay.w1 + (j + 1) * din];
            *p = vector::dot(row, u) + x[lay.b1 + j];
        }
        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let mut logits = vec![0.0; classes];
        for (c, l) in logits.iter_mut().enumerate() {
            let row = &x[lay.w2 + c * h..lay.w2 + (c + 1) * h];
            *l = vector::dot(row, &act) + x[lay.b2 + c];
        }
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| libm::exp(l - mx)).sum();
        let log_sum_exp = mx + libm::log(sum);
        MlpForward {
            pre,
            act,
            logits,
            log_sum_exp,
        }
    }

    fn mlp_backward(&self, x: &[f64], sample: &Sample, classes: usize, out: &mut [f64]) {
        let lay = self.mlp_layout(classes);
        let h = MLP_HIDDEN;
        let din = self.input_dim;
        let u = &sample.features;
        let fwd = self.mlp_forward(x, u, classes);
        let y = class_index(sample.label, classes).unwrap_or(0);
        let dlogits: Vec<f64> = fwd
            .logits
            .iter()
            .enumerate()
            .map(|(c, l)| libm::exp(l - fwd.log_sum_exp) - if c == y { 1.0 } else { 0.0 })
            .collect();
        let mut dact = vec![0.0; h];
        for (c, dl) in dlogits.iter().enumerate() {
            for j in 0..h {
                out[lay.w2 + c * h + j] = dl * fwd.act[j];
                dact[j] += x[lay.w2 + c * h + j] * dl;
            }
            out[lay.b2 + c] = *dl;
        }
        for j in 0..h {
            let dpre = if fwd.pre[j] > 0.0 { dact[j] } else { 0.0 };
            for (i, ui) in u.iter().enumerate() {
                out[lay.w1 + j * din + i] = dpre * ui;
            }
            out[lay.b1 + j] = dpre;
        }
    }

    /// Smoothness `L`, gradient bound `M` and strong convexity `μ`.
    ///
    /// Quadratic: `L = λ_max(A)`, `μ = λ_min(A)`, and `M` bounds
    /// `‖A(x - c_i)‖` over the ball `‖x‖ ≤ radius` by
    /// `λ_max·radius + max_i ‖A c_i‖` (tight when `A` is a multiple of the
    /// identity). `radius` defaults to the largest center norm.
    ///
    /// Logistic: `L = max ‖u‖²/4 + reg`, `M = max ‖u‖ + reg·radius`
    /// (default radius 10).
    ///
    /// MLP: sampled estimates, flagged `approximate`.
    pub fn lipschitz_estimate(&self, samples: &[Sample], radius: Option<f64>) -> Result<Constants> {
        self.check_dataset(samples)?;
        match &self.model {
            Model::Quadratic { a } => {
                let ev = a.eigenvalues();
                let lmax = *ev.last().unwrap();
                let lmin = ev[0].max(0.0);
                let radius = radius.unwrap_or_else(|| max_feature_norm(samples));
                let max_ac = samples
                    .iter()
                    .map(|s| vector::norm(&a.mul_vec(&s.features)))
                    .fold(0.0, f64::max);
                Ok(Constants {
                    smoothness: lmax,
                    grad_bound: (lmax * radius + max_ac).max(f64::MIN_POSITIVE),
                    strong_convexity: lmin,
                    approximate: false,
                })
            }
            Model::Logistic { reg } => {
                let radius = radius.unwrap_or(10.0);
                let umax = max_feature_norm(samples);
                Ok(Constants {
                    smoothness: (umax * umax / 4.0 + reg).max(f64::MIN_POSITIVE),
                    grad_bound: (umax + reg * radius).max(f64::MIN_POSITIVE),
                    strong_convexity: *reg,
                    approximate: false,
                })
            }
            Model::Mlp { .. } => Ok(self.mlp_constants(samples, radius.unwrap_or(1.0))),
        }
    }

    fn mlp_constants(&self, samples: &[Sample], scale: f64) -> Constants {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x4d4c_505f_4c49_5053);
        let normal = Normal::new(0.0, 0.1 * scale).unwrap();
        let probe: Vec<Sample> = samples.iter().take(256).cloned().collect();
        let mut g_bound = 0.0f64;
        let mut l_est = 0.0f64;
        let mut gx = ParamVector::zeros(self.dim);
        for _ in 0..16 {
            let x: Vec<f64> = (0..self.dim).map(|_| normal.sample(&mut rng)).collect();
            for s in &probe {
                self.grad_into(&x, s, &mut gx);
                g_bound = g_bound.max(gx.norm());
            }
            let y: Vec<f64> = x.iter().map(|v| v + 1e-3 * normal.sample(&mut rng)).collect();
            let fx = self.grad_sum(&x, &probe);
            let fy = self.grad_sum(&y, &probe);
            let n = probe.len() as f64;
            let num = vector::distance(&fx, &fy) / n;
            let den = vector::distance(&x, &y);
            if den > 0.0 {
                l_est = l_est.max(num / den);
            }
        }
        Constants {
            smoothness: l_est.max(1e-6),
            grad_bound: g_bound.max(1e-6),
            strong_convexity: 0.0,
            approximate: true,
        }
    }

    /// Optimal value of the empirical objective: exact for quadratics (the
    /// minimizer is the mean center), otherwise the best point of a long
    /// full-batch gradient descent run with step `1/L`.
    pub fn optimum(&self, samples: &[Sample], reference_iters: usize) -> Result<Optimum> {
        self.check_dataset(samples)?;
        if let Model::Quadratic { .. } = self.model {
            let mut mean = ParamVector::zeros(self.dim);
            for s in samples {
                vector::axpy(1.0, &s.features, &mut mean);
            }
            let n = samples.len() as f64;
            mean.iter_mut().for_each(|v| *v /= n);
            let value = self.full_loss(&mean, samples)?;
            return Ok(Optimum {
                value,
                point: mean,
                exact: true,
            });
        }
        let c = self.lipschitz_estimate(samples, None)?;
        let step = 1.0 / c.smoothness;
        let mut x = ParamVector::zeros(self.dim);
        let mut best = (self.full_loss(&x, samples)?, x.clone());
        for _ in 0..reference_iters {
            let g = self.full_grad(&x, samples)?;
            vector::axpy(-step, &g, &mut x);
            let f = self.full_loss(&x, samples)?;
            if !f.is_finite() {
                break;
            }
            if f < best.0 {
                best = (f, x.clone());
            }
        }
        Ok(Optimum {
            value: best.0,
            point: best.1,
            exact: false,
        })
    }
}

struct MlpLayout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

struct MlpForward {
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: Vec<f64>,
    log_sum_exp: f64,
}

fn class_index(label: f64, classes: usize) -> Result<usize> {
    if label >= 0.0 && libm::trunc(label) == label && (label as usize) < classes {
        Ok(label as usize)
    } else {
        Err(Error::InvalidLabel { label, classes })
    }
}

fn max_feature_norm(samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|s| vector::norm(&s.features))
        .fold(0.0, f64::max)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}
