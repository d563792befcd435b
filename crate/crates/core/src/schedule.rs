//! Delay models that decide which worker's job is applied at each inner
//! iteration.
//!
//! * [`DelayMode::Direct`]: each job draws a target staleness
//!   `s ~ Uniform{0..=Δ}` and claims the earliest free iteration at or after
//!   `pull + s`. Claims that would land beyond `pull + Δ` are redrawn. When
//!   an iteration comes up with no claim, the earliest pending claim is
//!   pulled forward, so every inner iteration applies exactly one job and
//!   realized staleness never exceeds the drawn target.
//! * [`DelayMode::ServiceTime`]: each job occupies `Uniform{1..=Δ+1}` ticks
//!   and completions are applied in tick order (worker id breaks ties).
//!   Realized staleness is measured, not enforced.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Bound on redraws per job in direct mode.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    #[default]
    Direct,
    ServiceTime,
}

impl DelayMode {
    pub fn name(self) -> &'static str {
        match self {
            DelayMode::Direct => "direct",
            DelayMode::ServiceTime => "service-time",
        }
    }
}

#[derive(Debug, Clone)]
enum State {
    Direct {
        /// apply iteration -> worker
        slots: BTreeMap<usize, usize>,
        /// worker -> (slot, pull)
        claims: Vec<Option<(usize, usize)>>,
    },
    Service {
        now: u64,
        queue: BinaryHeap<Reverse<(u64, usize)>>,
        /// worker -> (start tick, duration)
        running: Vec<Option<(u64, u64)>>,
    },
}

/// Interrupted job bookkeeping returned by [`Scheduler::interrupt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preempted {
    pub worker: usize,
    /// Fraction of the job's planned duration already elapsed, in `[0, 1)`.
    pub progress: f64,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    max_delay: usize,
    rng: StreamRng,
    state: State,
    draws: Vec<usize>,
    redraws: usize,
}

impl Scheduler {
    pub fn new(mode: DelayMode, max_delay: usize, workers: usize, rng: StreamRng) -> Self {
        let state = match mode {
            DelayMode::Direct => State::Direct {
                slots: BTreeMap::new(),
                claims: vec![None; workers],
            },
            DelayMode::ServiceTime => State::Service {
                now: 0,
                queue: BinaryHeap::new(),
                running: vec![None; workers],
            },
        };
        Scheduler {
            max_delay,
            rng,
            state,
            draws: Vec::new(),
            redraws: 0,
        }
    }

    /// Accepted staleness targets (direct) or durations (service-time), in
    /// submission order.
    pub fn draws(&self) -> &[usize] {
        &self.draws
    }

    /// Number of direct-mode claims rejected and redrawn.
    pub fn redraws(&self) -> usize {
        self.redraws
    }

    /// Registers `worker`'s new job, pulled at iteration `pull`.
    pub fn submit(&mut self, worker: usize, pull: usize) -> Result<()> {
        let max_delay = self.max_delay;
        match &mut self.state {
            State::Direct { slots, claims } => {
                for attempt in 0..=MAX_REDRAWS {
                    let s = self.rng.gen_range(0..=max_delay);
                    let mut slot = pull + s;
                    while slots.contains_key(&slot) {
                        slot += 1;
                    }
                    if slot - pull <= max_delay {
                        slots.insert(slot, worker);
                        claims[worker] = Some((slot, pull));
                        self.draws.push(s);
                        return Ok(());
                    }
                    if attempt < MAX_REDRAWS {
                        self.redraws += 1;
                    }
                }
                Err(Error::NoFeasibleSlot {
                    pull,
                    retries: MAX_REDRAWS,
                })
            }
            State::Service {
                now,
                queue,
                running,
            } => {
                let duration = self.rng.gen_range(1..=max_delay as u64 + 1);
                queue.push(Reverse((*now + duration, worker)));
                running[worker] = Some((*now, duration));
                self.draws.push(duration as usize);
                Ok(())
            }
        }
    }

    /// The worker whose job is applied at inner iteration `k`.
    pub fn next(&mut self, k: usize) -> Result<usize> {
        match &mut self.state {
            State::Direct { slots, claims } => {
                let slot = *slots
                    .range(k..)
                    .next()
                    .ok_or(Error::NoJobAvailable { iteration: k })?
                    .0;
                let worker = slots.remove(&slot).unwrap();
                claims[worker] = None;
                Ok(worker)
            }
            State::Service {
                now,
                queue,
                running,
            } => {
                let Reverse((finish, worker)) =
                    queue.pop().ok_or(Error::NoJobAvailable { iteration: k })?;
                *now = finish;
                running[worker] = None;
                Ok(worker)
            }
        }
    }

    /// Cancels every pending job at iteration `k`.
    pub fn interrupt(&mut self, k: usize) -> Vec<Preempted> {
        let mut out = Vec::new();
        match &mut self.state {
            State::Direct { slots, claims } => {
                for (worker, claim) in claims.iter_mut().enumerate() {
                    if let Some((slot, pull)) = claim.take() {
                        let span = (slot - pull + 1) as f64;
                        out.push(Preempted {
                            worker,
                            progress: (k.saturating_sub(pull) as f64 / span).min(1.0),
                        });
                    }
                }
                slots.clear();
            }
            State::Service {
                now,
                queue,
                running,
            } => {
                for (worker, run) in running.iter_mut().enumerate() {
                    if let Some((start, duration)) = run.take() {
                        out.push(Preempted {
                            worker,
                            progress: ((*now - start) as f64 / duration as f64).min(1.0),
                        });
                    }
                }
                queue.clear();
            }
        }
        out
    }
}
