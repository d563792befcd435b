//! Distributed-memory SYNTHESIS: `P` workers and one parameter server.
//!
//! Every `q`-th iteration is synchronous: the server interrupts all workers,
//! collects their shard gradient sums `G_p`, forms `v_k = (1/N) Σ_p G_p` and
//! broadcasts `(x_k, v_k)` as the new chain origin. The remaining iterations
//! apply one stale recursive estimate each, in the order chosen by the delay
//! scheduler. Every update is `x_{k+1} = x_k − η v_k`.

use crate::config::{Algorithm, Architecture, RunConfig};
use crate::data::Dataset;
use crate::engine::{self, NoObserver, Observer};
use crate::error::Result;
use crate::objective::ObjectiveModel;
use crate::trace::Trace;

pub fn run_synthesis_dm(cfg: &RunConfig, model: &ObjectiveModel, data: &Dataset) -> Result<Trace> {
    engine::simulate(Algorithm::Synthesis, Architecture::Distributed, cfg, model, data, &mut NoObserver)
}

pub fn run_synthesis_dm_observed<O: Observer + ?Sized>(
    cfg: &RunConfig,
    model: &ObjectiveModel,
    data: &Dataset,
    observer: &mut O,
) -> Result<Trace> {
    engine::simulate(Algorithm::Synthesis, Architecture::Distributed, cfg, model, data, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, SynthKind};
    use crate::linalg::SymMatrix;
    use crate::schedule::DelayMode;

    fn quad(d: usize) -> ObjectiveModel {
        ObjectiveModel::quadratic(SymMatrix::identity(d)).unwrap()
    }

    #[test]
    fn sfo_example() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 25, 2, 1).unwrap();
        let cfg = RunConfig::new(1, 0, 5, 5, 0.1, 10, 3);
        let t = run_synthesis_dm(&cfg, &quad(2), &data).unwrap();
        assert_eq!(t.sfo.analytic, 100);
        assert_eq!(t.iterations(), 10);
    }

    #[test]
    fn deterministic() {
        let data = synthesize(SynthKind::Logistic, 60, 4, 2).unwrap();
        let model = ObjectiveModel::logistic(4, 0.0).unwrap();
        let mut cfg = RunConfig::new(3, 3, 8, 4, 0.5, 300, 17);
        cfg.delay_mode = DelayMode::Direct;
        let a = run_synthesis_dm(&cfg, &model, &data).unwrap();
        let b = run_synthesis_dm(&cfg, &model, &data).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn staleness_bounded_and_one_worker_per_inner_step() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 100, 3, 4).unwrap();
        let cfg = RunConfig::new(4, 5, 10, 5, 0.05, 500, 8);
        let t = run_synthesis_dm(&cfg, &quad(3), &data).unwrap();
        assert_eq!(t.steps.len(), 500);
        for s in &t.steps {
            assert_eq!(s.sync, s.k % 10 == 0);
            assert_eq!(s.worker.is_some(), !s.sync);
            assert!(s.tau.map_or(true, |tau| tau <= 5));
        }
        assert!(t.max_tau <= 5);
    }

    #[test]
    fn interrupted_jobs_never_cross_a_sync() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 100, 3, 4).unwrap();
        let cfg = RunConfig::new(4, 6, 7, 5, 0.05, 400, 1);
        let t = run_synthesis_dm(&cfg, &quad(3), &data).unwrap();
        assert!(!t.interruptions.is_empty());
        for s in &t.steps {
            if let Some(tau) = s.tau {
                let pull = s.k - tau;
                // no sync iteration in (pull, k]
                assert!((pull + 1..=s.k).all(|j| j % 7 != 0));
                assert!(pull % 7 != 0);
            }
        }
        for i in &t.interruptions {
            assert_eq!(i.at % 7, 0);
            assert!(i.pull < i.at);
        }
    }

    #[test]
    fn service_time_mode_runs() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 64, 2, 4).unwrap();
        let mut cfg = RunConfig::new(6, 2, 8, 4, 0.05, 300, 1);
        cfg.delay_mode = DelayMode::ServiceTime;
        let t = run_synthesis_dm(&cfg, &quad(2), &data).unwrap();
        assert_eq!(t.iterations(), 300);
        assert!(t.taus().all(|tau| tau <= t.max_tau));
    }

    #[test]
    fn batch_larger_than_shard_is_rejected() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 20, 2, 4).unwrap();
        let cfg = RunConfig::new(4, 3, 5, 6, 0.05, 30, 1);
        assert!(run_synthesis_dm(&cfg, &quad(2), &data).is_err());
    }

    #[test]
    fn infeasible_direct_mode_is_reported() {
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 64, 2, 4).unwrap();
        let cfg = RunConfig::new(3, 0, 8, 4, 0.05, 30, 1);
        let err = run_synthesis_dm(&cfg, &quad(2), &data).unwrap_err();
        assert!(matches!(err, crate::error::Error::NoFeasibleSlot { .. }));
    }
}
