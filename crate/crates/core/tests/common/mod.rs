//! Test-side reference implementations, written without the simulator's
//! engine, scheduler or worker state.

#![allow(dead_code)]

use rand::Rng;
use vrsim_core::rng::{sample_batch, stream, Stream};
use vrsim_core::{Dataset, ObjectiveModel, Sample, SymMatrix};

/// Per-sample gradient oracle used by the reference loops.
pub type GradFn<'a> = dyn Fn(&[f64], &Sample) -> Vec<f64> + 'a;

pub struct SerialRun {
    /// `x_0, x_1, …, x_K`
    pub iterates: Vec<Vec<f64>>,
    pub zeta: usize,
}

impl SerialRun {
    pub fn x_final(&self) -> &[f64] {
        self.iterates.last().unwrap()
    }

    pub fn x_zeta(&self) -> &[f64] {
        &self.iterates[self.zeta]
    }
}

fn full_grad(grad: &GradFn<'_>, x: &[f64], samples: &[Sample]) -> Vec<f64> {
    let mut sum = vec![0.0; x.len()];
    for s in samples {
        for (a, g) in sum.iter_mut().zip(grad(x, s)) {
            *a += g;
        }
    }
    let n = samples.len() as f64;
    sum.iter_mut().for_each(|v| *v /= n);
    sum
}

/// `(1/b) Σ (∇f(x, ξ) − ∇f(y, ξ)) + v`
fn correction(grad: &GradFn<'_>, x: &[f64], y: &[f64], v: &[f64], batch: &[usize], samples: &[Sample]) -> Vec<f64> {
    let mut acc = vec![0.0; x.len()];
    for &i in batch {
        let gx = grad(x, &samples[i]);
        let gy = grad(y, &samples[i]);
        for j in 0..x.len() {
            acc[j] += gx[j] - gy[j];
        }
    }
    let b = batch.len() as f64;
    (0..x.len()).map(|j| acc[j] / b + v[j]).collect()
}

/// Serial SpiderBoost: full gradient every `q` iterations, recursive
/// two-point corrections in between, constant step `eta`.
pub fn spiderboost(grad: &GradFn<'_>, data: &Dataset, q: usize, batch: usize, eta: f64, k_total: usize, seed: u64) -> SerialRun {
    let samples = data.samples();
    let n = samples.len();
    let zeta = stream(seed, Stream::OutputIndex).gen_range(1..=k_total);
    let mut batches = stream(seed, Stream::Batch);
    let dim = samples[0].features.len();
    let mut x = vec![0.0; dim];
    let mut prev_x = x.clone();
    let mut v = vec![0.0; dim];
    let mut iterates = vec![x.clone()];
    for k in 0..k_total {
        if k % q == 0 {
            v = full_grad(grad, &x, samples);
        } else {
            let b = sample_batch(&mut batches, 0..n, batch);
            v = correction(grad, &x, &prev_x, &v, &b, samples);
        }
        prev_x = x.clone();
        for j in 0..dim {
            x[j] -= eta * v[j];
        }
        iterates.push(x.clone());
    }
    SerialRun { iterates, zeta }
}

/// Serial SVRG with an anchor refreshed every `q` iterations; the anchor
/// iteration itself takes a full-gradient step.
pub fn svrg(grad: &GradFn<'_>, data: &Dataset, dim: usize, q: usize, batch: usize, eta: f64, k_total: usize, seed: u64) -> SerialRun {
    let samples = data.samples();
    let n = samples.len();
    let zeta = stream(seed, Stream::OutputIndex).gen_range(1..=k_total);
    let mut batches = stream(seed, Stream::Batch);
    let mut x = vec![0.0; dim];
    let mut anchor = (x.clone(), vec![0.0; dim]);
    let mut iterates = vec![x.clone()];
    for k in 0..k_total {
        let v = if k % q == 0 {
            let g = full_grad(grad, &x, samples);
            anchor = (x.clone(), g.clone());
            g
        } else {
            let b = sample_batch(&mut batches, 0..n, batch);
            correction(grad, &x, &anchor.0, &anchor.1, &b, samples)
        };
        for j in 0..dim {
            x[j] -= eta * v[j];
        }
        iterates.push(x.clone());
    }
    SerialRun { iterates, zeta }
}

/// `A(x − c)` for a diagonal `A`, computed independently of the library.
pub fn diag_quadratic_grad(diag: &[f64]) -> impl Fn(&[f64], &Sample) -> Vec<f64> + '_ {
    move |x, s| x.iter().zip(&s.features).zip(diag).map(|((xi, ci), a)| a * (xi - ci)).collect()
}

/// Diagonal curvature with eigenvalues spread geometrically over `[lo, hi]`.
pub fn spread_diag(d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let t = if d == 1 { 1.0 } else { i as f64 / (d - 1) as f64 };
            lo * (hi / lo).powf(t)
        })
        .collect()
}

pub fn quadratic(diag: &[f64]) -> ObjectiveModel {
    ObjectiveModel::quadratic(SymMatrix::diag(diag)).unwrap()
}

/// `‖A(x − c̄)‖²`: the full-gradient norm of a quadratic, via the mean center.
pub fn quadratic_grad_norm_sq(diag: &[f64], data: &Dataset, x: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mut mean = vec![0.0; x.len()];
    for s in data.samples() {
        for (m, c) in mean.iter_mut().zip(&s.features) {
            *m += c / n;
        }
    }
    x.iter().zip(&mean).zip(diag).map(|((xi, ci), a)| (a * (xi - ci)).powi(2)).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean.
pub fn stderr(v: &[f64]) -> f64 {
    let m = mean(v);
    let n = v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
}
