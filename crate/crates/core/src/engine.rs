//! The discrete-event loop shared by every algorithm and architecture.
//!
//! Logical concurrency is simulated: the server iteration counter `k` is the
//! only clock the algorithms see. Workers pull a copy of the iterate, the
//! delay scheduler decides when their gradient information arrives, and the
//! server consumes exactly one direction per iteration.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{Algorithm, Architecture, Init, RunConfig, Sampling};
use crate::data::{self, Dataset};
use crate::error::{invalid, Error, Result};
use crate::objective::ObjectiveModel;
use crate::rng::{self, Stream, StreamRng};
use crate::schedule::{DelayMode, Scheduler};
use crate::trace::{GridPoint, Interruption, StepRecord, Trace};
use crate::vector::ParamVector;
use crate::vr_core::{self, Job, SfoCounter, WorkerState};

/// Hook into every iteration of a run.
pub trait Observer {
    /// Called at iteration `k` with the iterate `x_k` and the direction `v_k`
    /// the server is about to apply.
    fn on_iteration(&mut self, k: usize, x: &[f64], v: &[f64], step: &StepRecord) {
        let _ = (k, x, v, step);
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {}

impl<F: FnMut(usize, &[f64], &[f64], &StepRecord)> Observer for F {
    fn on_iteration(&mut self, k: usize, x: &[f64], v: &[f64], step: &StepRecord) {
        self(k, x, v, step)
    }
}

struct Sim<'a> {
    algo: Algorithm,
    arch: Architecture,
    cfg: &'a RunConfig,
    model: &'a ObjectiveModel,
    data: &'a Dataset,
    workers: Vec<WorkerState>,
    prev_job: Vec<u64>,
    scheduler: Scheduler,
    batch_rng: StreamRng,
    next_job_id: u64,
    x: ParamVector,
    anchor: Option<(ParamVector, ParamVector)>,
    sampling: Sampling,
    sfo: SfoCounter,
    interruptions: Vec<Interruption>,
}

impl<'a> Sim<'a> {
    fn is_sync(&self, k: usize) -> bool {
        self.algo.has_outer_loop() && k % self.cfg.epoch_len == 0
    }

    fn evals_per_job(&self) -> u64 {
        match self.algo {
            Algorithm::AsyncSgd => self.cfg.batch as u64,
            _ => 2 * self.cfg.batch as u64,
        }
    }

    /// Worker `w` copies the current iterate (pulled at iteration `pull`)
    /// and draws its mini-batch.
    fn spawn(&mut self, w: usize, pull: usize) -> Result<()> {
        if pull >= self.cfg.iterations || self.is_sync(pull) {
            return Ok(());
        }
        self.next_job_id += 1;
        let shard = self.workers[w].shard.clone();
        let batch = rng::sample_batch(&mut self.batch_rng, shard, self.cfg.batch);
        self.workers[w].in_flight = Some(Job {
            id: self.next_job_id,
            worker: w,
            pull,
            batch,
            snapshot: self.x.clone(),
        });
        self.scheduler.submit(w, pull)
    }

    fn interrupt_all(&mut self, k: usize) {
        let evals = self.evals_per_job();
        for p in self.scheduler.interrupt(k) {
            if let Some(job) = self.workers[p.worker].in_flight.take() {
                let charged = libm::floor(p.progress * evals as f64) as u64;
                self.sfo.true_evals += charged;
                self.interruptions.push(Interruption {
                    worker: p.worker,
                    job: job.id,
                    pull: job.pull,
                    at: k,
                    charged,
                });
            }
        }
    }

    /// Exact full gradient at a sync iteration.
    fn sync_direction(&mut self) -> ParamVector {
        let samples = self.data.samples();
        let n = samples.len() as f64;
        let mut v = match (self.algo, self.arch, self.sampling) {
            (Algorithm::Synthesis, Architecture::Distributed, Sampling::Shard) => {
                let mut total = ParamVector::zeros(self.model.dim());
                for w in &self.workers {
                    let g = w.local_full_grad(&self.x, self.model, samples, &mut self.sfo);
                    for (t, gi) in total.iter_mut().zip(g.iter()) {
                        *t += gi;
                    }
                }
                total
            }
            _ => {
                self.sfo.true_evals += samples.len() as u64;
                self.model.grad_sum(&self.x, samples)
            }
        };
        v.iter_mut().for_each(|c| *c /= n);
        v
    }

    fn inner_direction(&mut self, job: &Job) -> Result<ParamVector> {
        let samples = self.data.samples();
        let w = job.worker;
        let batch = &job.batch;
        if self.algo != Algorithm::Synthesis {
            self.sfo.true_evals += self.evals_per_job();
        }
        match self.algo {
            Algorithm::Synthesis => {
                let state = &mut self.workers[w];
                if state.last_job != self.prev_job[w] {
                    return Err(invalid("chain", alloc::format!("worker {w} estimator chain broken")));
                }
                let v = state.vr_update(&job.snapshot, batch, self.model, samples, &mut self.sfo)?;
                state.last_job = job.id;
                self.prev_job[w] = job.id;
                Ok(v)
            }
            Algorithm::AsyncSgd => {
                let mut v = self.model.grad_sum_indexed(&job.snapshot, samples, batch);
                let b = batch.len() as f64;
                v.iter_mut().for_each(|c| *c /= b);
                Ok(v)
            }
            Algorithm::AsyncSvrg => {
                let (ax, ag) = self.anchor.as_ref().ok_or(Error::UninitializedWorker { worker: w })?;
                Ok(vr_core::estimate(&job.snapshot, ax, ag, batch, self.model, samples))
            }
        }
    }
}

/// Starting iterate `x_0` for `cfg` in dimension `d`.
pub fn initial_point(cfg: &RunConfig, d: usize) -> Result<ParamVector> {
    Ok(match cfg.init {
        Init::Zeros => ParamVector::zeros(d),
        Init::Gaussian { std } => {
            let mut init_rng = rng::stream(cfg.seed, Stream::Init);
            let normal = Normal::new(0.0, std).map_err(|_| invalid("init", "bad standard deviation"))?;
            (0..d).map(|_| normal.sample(&mut init_rng)).collect::<Vec<_>>().into()
        }
    })
}

/// Runs `algo` under `arch` for `cfg.iterations` server iterations.
pub fn simulate<O: Observer + ?Sized>(
    algo: Algorithm,
    arch: Architecture,
    cfg: &RunConfig,
    model: &ObjectiveModel,
    data: &Dataset,
    observer: &mut O,
) -> Result<Trace> {
    let samples = data.samples();
    let n = samples.len();
    model.check_dataset(samples)?;
    let mut warnings = cfg.validate(n)?;
    let d = model.dim();
    let k_total = cfg.iterations;

    let sampling = cfg.sampling_for(algo, arch);
    let shards: Vec<core::ops::Range<usize>> = match sampling {
        Sampling::Shard => data::shard(n, cfg.workers)?.ranges().to_vec(),
        Sampling::Global => vec![0..n; cfg.workers],
    };
    let min_shard = shards.iter().map(|r| r.len()).min().unwrap_or(0);
    if cfg.batch > min_shard {
        return Err(invalid(
            "batch",
            alloc::format!("|S| = {} exceeds the smallest sampling range ({min_shard})", cfg.batch),
        ));
    }
    if arch == Architecture::Shared && cfg.full_step_on_sync {
        warnings.push("full_step_on_sync: sync iterations move every coordinate".into());
    }

    let mut out_rng = rng::stream(cfg.seed, Stream::OutputIndex);
    let zeta = out_rng.gen_range(1..=k_total);
    let mut coord_rng = rng::stream(cfg.seed, Stream::Coordinate);
    let x0 = initial_point(cfg, d)?;

    let mut sim = Sim {
        algo,
        arch,
        cfg,
        model,
        data,
        workers: shards
            .iter()
            .enumerate()
            .map(|(w, r)| WorkerState::new(w, d, r.clone()))
            .collect(),
        prev_job: vec![0; cfg.workers],
        scheduler: Scheduler::new(cfg.delay_mode, cfg.max_delay, cfg.workers, rng::stream(cfg.seed, Stream::Delay)),
        batch_rng: rng::stream(cfg.seed, Stream::Batch),
        next_job_id: 0,
        x: x0,
        anchor: None,
        sampling,
        sfo: SfoCounter::default(),
        interruptions: Vec::new(),
    };

    let stride = cfg.grid_stride();
    let mut steps = Vec::with_capacity(k_total);
    let mut grid = Vec::with_capacity(k_total / stride + 2);
    let mut x_zeta = None;
    let mut max_tau = 0;
    let batch = cfg.batch as u64;

    if !algo.has_outer_loop() {
        for w in 0..cfg.workers {
            sim.spawn(w, 0)?;
        }
    }

    for k in 0..k_total {
        let on_grid = k % stride == 0;
        if on_grid {
            grid.push(evaluate(model, data, &sim.x, k, cfg.epoch_len)?);
        }
        if k == zeta {
            x_zeta = Some(sim.x.clone());
        }
        let sync = sim.is_sync(k);
        let mut record = StepRecord {
            k,
            worker: None,
            tau: None,
            sync,
            coord: None,
        };
        let v = if sync {
            sim.interrupt_all(k);
            let v = sim.sync_direction();
            sim.sfo.analytic += n as u64;
            match algo {
                Algorithm::Synthesis => {
                    for w in 0..cfg.workers {
                        sim.workers[w].outer_sync(&sim.x, &v);
                        sim.prev_job[w] = 0;
                    }
                    sim.sfo.analytic += batch;
                }
                Algorithm::AsyncSvrg => {
                    sim.anchor = Some((sim.x.clone(), v.clone()));
                    sim.sfo.analytic += 2 * batch;
                }
                Algorithm::AsyncSgd => unreachable!("no outer loop"),
            }
            v
        } else {
            let w = sim.scheduler.next(k)?;
            let job = sim.workers[w]
                .in_flight
                .take()
                .ok_or(Error::NoJobAvailable { iteration: k })?;
            let tau = k - job.pull;
            if cfg.delay_mode == DelayMode::Direct && tau > cfg.max_delay {
                return Err(invalid("delta", alloc::format!("staleness {tau} exceeded bound at iteration {k}")));
            }
            max_tau = max_tau.max(tau);
            record.worker = Some(w);
            record.tau = Some(tau);
            sim.sfo.analytic += match algo {
                Algorithm::AsyncSvrg => 2 * batch,
                _ => batch,
            };
            sim.inner_direction(&job)?
        };

        if arch == Architecture::Shared {
            record.coord = Some(coord_rng.gen_range(0..d));
        }
        observer.on_iteration(k, &sim.x, &v, &record);

        match record.coord {
            Some(m) if !(sync && cfg.full_step_on_sync) => sim.x[m] -= cfg.step * v[m],
            _ => {
                for j in 0..d {
                    sim.x[j] -= cfg.step * v[j];
                }
            }
        }
        if !sim.x.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }

        if sync {
            for w in 0..cfg.workers {
                sim.spawn(w, k + 1)?;
            }
        } else if let Some(w) = record.worker {
            sim.spawn(w, k + 1)?;
        }

        if on_grid {
            grid.last_mut().unwrap().sfo = sim.sfo;
        }
        steps.push(record);
    }

    let mut last = evaluate(model, data, &sim.x, k_total, cfg.epoch_len)?;
    last.sfo = sim.sfo;
    grid.push(last);
    let x_zeta = x_zeta.unwrap_or_else(|| sim.x.clone());
    let grad_norm_sq_at_zeta = model.full_grad(&x_zeta, data.samples())?.norm_sq();

    Ok(Trace {
        algorithm: algo,
        architecture: arch,
        steps,
        grid,
        zeta,
        x_zeta,
        grad_norm_sq_at_zeta,
        final_loss: last.loss,
        x_final: sim.x,
        sfo: sim.sfo,
        max_tau,
        interruptions: sim.interruptions,
        redraws: sim.scheduler.redraws(),
        warnings,
    })
}

fn evaluate(model: &ObjectiveModel, data: &Dataset, x: &[f64], k: usize, q: usize) -> Result<GridPoint> {
    Ok(GridPoint {
        k,
        epoch: k / q,
        loss: model.full_loss(x, data.samples())?,
        grad_norm_sq: model.full_grad(x, data.samples())?.norm_sq(),
        sfo: SfoCounter::default(),
    })
}
