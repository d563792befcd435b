//! The path-integrated variance-reduced estimator and the per-worker state
//! it threads through an epoch.
//!
//! Each worker keeps the last point it evaluated (`x_old`) and the estimate
//! it produced there (`v_old`). A new estimate at `x_new` adds the mini-batch
//! average of the gradient difference between the two points:
//!
//! ```text
//! v_new = (1/|B|) Σ_{i∈B} (∇f(x_new, ξ_i) − ∇f(x_old, ξ_i)) + v_old
//! ```
//!
//! An outer sync resets the chain to an exact full gradient.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::objective::{ObjectiveModel, Sample};
use crate::vector::ParamVector;

/// Oracle-call counters.
///
/// `analytic` charges one call per mini-batch sample per iteration and `N`
/// per outer sync;
/// `true_evals` counts every per-sample gradient actually evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SfoCounter {
    pub analytic: u64,
    pub true_evals: u64,
}

/// A unit of worker computation: gradient information for the snapshot
/// pulled at iteration `pull`, evaluated lazily when it is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: u64,
    pub worker: usize,
    pub pull: usize,
    pub batch: Vec<usize>,
    pub snapshot: ParamVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerState {
    pub worker_id: usize,
    pub x_old: ParamVector,
    pub v_old: ParamVector,
    pub shard: Range<usize>,
    pub in_flight: Option<Job>,
    /// Id of the job whose output is currently `v_old` (0 after a sync).
    pub last_job: u64,
    initialized: bool,
}

impl WorkerState {
    pub fn new(worker_id: usize, dim: usize, shard: Range<usize>) -> Self {
        WorkerState {
            worker_id,
            x_old: ParamVector::zeros(dim),
            v_old: ParamVector::zeros(dim),
            shard,
            in_flight: None,
            last_job: 0,
            initialized: false,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Broadcast of `(x_k, v_k)`: restarts the estimator chain and discards
    /// any unfinished job, which is returned so the caller can log it.
    pub fn outer_sync(&mut self, x_k: &[f64], v_k: &[f64]) -> Option<Job> {
        self.x_old.copy_from_slice(x_k);
        self.v_old.copy_from_slice(v_k);
        self.initialized = true;
        self.last_job = 0;
        self.in_flight.take()
    }

    /// Sum of per-sample gradients at `x_k` over this worker's shard.
    pub fn local_full_grad(
        &self,
        x_k: &[f64],
        model: &ObjectiveModel,
        samples: &[Sample],
        sfo: &mut SfoCounter,
    ) -> ParamVector {
        sfo.true_evals += self.shard.len() as u64;
        model.grad_sum(x_k, &samples[self.shard.clone()])
    }

    /// Produces `v_new` at `x_new` from `batch`, then advances the chain so
    /// that `(x_old, v_old) = (x_new, v_new)`.
    pub fn vr_update(
        &mut self,
        x_new: &[f64],
        batch: &[usize],
        model: &ObjectiveModel,
        samples: &[Sample],
        sfo: &mut SfoCounter,
    ) -> Result<ParamVector> {
        if !self.initialized {
            return Err(Error::UninitializedWorker {
                worker: self.worker_id,
            });
        }
        if batch.is_empty() {
            return Err(crate::error::invalid("batch", "must be non-empty"));
        }
        let v_new = estimate(x_new, &self.x_old, &self.v_old, batch, model, samples);
        sfo.true_evals += 2 * batch.len() as u64;
        self.x_old.copy_from_slice(x_new);
        self.v_old.copy_from_slice(&v_new);
        Ok(v_new)
    }
}

/// `(1/|B|) Σ_{i∈B} (∇f(x_new, ξ_i) − ∇f(x_ref, ξ_i)) + v_ref`, summed in
/// batch order. Shared by the recursive estimator and the SVRG baseline.
pub(crate) fn estimate(
    x_new: &[f64],
    x_ref: &[f64],
    v_ref: &[f64],
    batch: &[usize],
    model: &ObjectiveModel,
    samples: &[Sample],
) -> ParamVector {
    let d = x_new.len();
    let mut acc = ParamVector::zeros(d);
    let mut g_new = ParamVector::zeros(d);
    let mut g_ref = ParamVector::zeros(d);
    for &i in batch {
        model.grad_into(x_new, &samples[i], &mut g_new);
        model.grad_into(x_ref, &samples[i], &mut g_ref);
        for j in 0..d {
            acc[j] += g_new[j] - g_ref[j];
        }
    }
    let b = batch.len() as f64;
    for j in 0..d {
        acc[j] = acc[j] / b + v_ref[j];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use alloc::vec;

    fn setup() -> (ObjectiveModel, Vec<Sample>) {
        let m = ObjectiveModel::quadratic(SymMatrix::identity(1)).unwrap();
        (m, vec![Sample::center(vec![1.0]), Sample::center(vec![-1.0])])
    }

    #[test]
    fn hand_computed_update() {
        let (m, data) = setup();
        let mut w = WorkerState::new(0, 1, 0..2);
        w.outer_sync(&[0.0], &[0.0]);
        let mut sfo = SfoCounter::default();
        let v = w.vr_update(&[0.5], &[0, 1], &m, &data, &mut sfo).unwrap();
        assert_eq!(v.as_slice(), &[0.5]);
        assert_eq!(sfo.true_evals, 4);
        assert_eq!(w.x_old.as_slice(), &[0.5]);
        assert_eq!(w.v_old.as_slice(), &[0.5]);
    }

    #[test]
    fn unchanged_point_returns_previous_estimate() {
        let (m, data) = setup();
        let mut w = WorkerState::new(0, 1, 0..2);
        w.outer_sync(&[0.3], &[0.7]);
        let mut sfo = SfoCounter::default();
        let v = w.vr_update(&[0.3], &[1], &m, &data, &mut sfo).unwrap();
        assert_eq!(v.as_slice(), &[0.7]);
    }

    #[test]
    fn uninitialized_worker_is_rejected() {
        let (m, data) = setup();
        let mut w = WorkerState::new(3, 1, 0..2);
        let mut sfo = SfoCounter::default();
        assert_eq!(
            w.vr_update(&[0.0], &[0], &m, &data, &mut sfo),
            Err(Error::UninitializedWorker { worker: 3 })
        );
    }

    #[test]
    fn sync_discards_in_flight_job() {
        let mut w = WorkerState::new(0, 1, 0..2);
        w.in_flight = Some(Job {
            id: 5,
            worker: 0,
            pull: 3,
            batch: vec![0],
            snapshot: ParamVector::zeros(1),
        });
        let dropped = w.outer_sync(&[1.0], &[2.0]);
        assert_eq!(dropped.map(|j| j.id), Some(5));
        assert!(w.in_flight.is_none());
        let (m, data) = setup();
        let mut sfo = SfoCounter::default();
        assert_eq!(
            w.vr_update(&[1.0], &[0, 1], &m, &data, &mut sfo).unwrap().as_slice(),
            &[2.0]
        );
    }

    #[test]
    fn local_full_grad_is_a_sum() {
        let (m, data) = setup();
        let w = WorkerState::new(0, 1, 0..2);
        let mut sfo = SfoCounter::default();
        let g = w.local_full_grad(&[2.0], &m, &data, &mut sfo);
        assert_eq!(g.as_slice(), &[4.0]);
        assert_eq!(sfo.true_evals, 2);
    }
}
