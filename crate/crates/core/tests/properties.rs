mod common;

use proptest::prelude::*;
use vrsim_core::config::auto_step;
use vrsim_core::data::{shard, synthesize, SynthKind};
use vrsim_core::dm_sim::run_synthesis_dm;
use vrsim_core::rng::{sample_batch, stream, Stream};
use vrsim_core::vr_core::{SfoCounter, WorkerState};
use vrsim_core::{Architecture, DelayMode, ObjectiveModel, RunConfig, SymMatrix};

fn central_difference(model: &ObjectiveModel, x: &[f64], s: &vrsim_core::Sample, h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[j] += h;
            m[j] -= h;
            (model.loss(&p, s).unwrap() - model.loss(&m, s).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shards_cover_contiguously(n in 1usize..400, p_frac in 0.0f64..1.0) {
        let p = 1 + ((n - 1) as f64 * p_frac) as usize;
        let s = shard(n, p).unwrap();
        let ranges = s.ranges();
        prop_assert_eq!(ranges.len(), p);
        prop_assert_eq!(ranges[0].start, 0);
        prop_assert_eq!(ranges[p - 1].end, n);
        for w in ranges.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        let sizes = s.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences(seed in any::<u64>(), reg in 0.0f64..0.5) {
        let data = synthesize(SynthKind::Logistic, 4, 5, seed).unwrap();
        let model = ObjectiveModel::logistic(5, reg).unwrap();
        let mut rng = stream(seed, Stream::Init);
        let x: Vec<f64> = (0..5).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect();
        for s in data.samples() {
            let g = model.grad(&x, s).unwrap();
            prop_assert!(rel_err(&g, &central_difference(&model, &x, s, 1e-5)) < 1e-5);
        }
    }

    #[test]
    fn full_gradient_is_the_shard_weighted_mean(seed in any::<u64>(), p in 1usize..6) {
        let data = synthesize(SynthKind::Logistic, 37, 3, seed).unwrap();
        let model = ObjectiveModel::logistic(3, 0.0).unwrap();
        let x = [0.3, -0.7, 1.1];
        let full = model.full_grad(&x, data.samples()).unwrap();
        let mut acc = [0.0; 3];
        for r in shard(37, p).unwrap().ranges() {
            let part = model.full_grad(&x, &data.samples()[r.clone()]).unwrap();
            for j in 0..3 {
                acc[j] += part[j] * r.len() as f64 / 37.0;
            }
        }
        for j in 0..3 {
            prop_assert!((acc[j] - full[j]).abs() <= 1e-12 * (1.0 + full[j].abs()));
        }
    }

    #[test]
    fn quadratic_gradient_is_l_lipschitz(seed in any::<u64>(), a in 0.1f64..3.0, b in 0.1f64..3.0, c in -1.0f64..1.0) {
        let m = SymMatrix::from_rows(2, vec![a + 1.0, c, c, b + 1.0]).unwrap();
        let model = ObjectiveModel::quadratic(m).unwrap();
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 20, 2, seed).unwrap();
        let l = model.lipschitz_estimate(data.samples(), None).unwrap().smoothness;
        let mut rng = stream(seed, Stream::Init);
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|_| rand::Rng::gen_range(&mut rng, -5.0..5.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rand::Rng::gen_range(&mut rng, -5.0..5.0)).collect();
            let gx = model.full_grad(&x, data.samples()).unwrap();
            let gy = model.full_grad(&y, data.samples()).unwrap();
            let num = vrsim_core::vector::distance(&gx, &gy);
            let den = vrsim_core::vector::distance(&x, &y);
            prop_assert!(num <= l * den * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn direct_mode_staleness_is_bounded(delta in 0usize..8, p_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let p = 1 + ((delta as f64 + 0.999) * p_frac) as usize;
        let data = synthesize(SynthKind::Quadratic { symmetric: false }, 100, 2, 1).unwrap();
        let model = ObjectiveModel::quadratic(SymMatrix::identity(2)).unwrap();
        let mut cfg = RunConfig::new(p.min(delta + 1), delta, 10, 5, 0.05, 200, seed);
        cfg.delay_mode = DelayMode::Direct;
        let t = run_synthesis_dm(&cfg, &model, &data).unwrap();
        prop_assert!(t.max_tau <= delta);
        prop_assert!(t.steps.iter().all(|s| s.sync || s.worker.is_some()));
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), mode in prop_oneof![Just(DelayMode::Direct), Just(DelayMode::ServiceTime)]) {
        let data = synthesize(SynthKind::Logistic, 50, 3, 9).unwrap();
        let model = ObjectiveModel::logistic(3, 0.0).unwrap();
        let mut cfg = RunConfig::new(3, 3, 8, 4, 0.5, 120, seed);
        cfg.delay_mode = mode;
        let a = run_synthesis_dm(&cfg, &model, &data).unwrap();
        let b = run_synthesis_dm(&cfg, &model, &data).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let data = synthesize(SynthKind::Classification { classes: 3 }, 10, 4, 2).unwrap();
    let model = ObjectiveModel::mlp(4, 3).unwrap();
    let mut rng = stream(2, Stream::Init);
    let x: Vec<f64> = (0..model.dim()).map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5)).collect();
    for s in data.samples() {
        let g = model.grad(&x, s).unwrap();
        assert!(rel_err(&g, &central_difference(&model, &x, s, 1e-6)) < 1e-5);
    }
}

#[test]
fn recursive_estimate_is_unbiased_given_exact_reference() {
    let data = synthesize(SynthKind::Logistic, 40, 3, 4).unwrap();
    let model = ObjectiveModel::logistic(3, 0.0).unwrap();
    let samples = data.samples();
    let x0 = [0.2, -0.4, 0.9];
    let x1 = [1.0, 0.5, -1.5];
    let g0 = model.full_grad(&x0, samples).unwrap();
    let g1 = model.full_grad(&x1, samples).unwrap();
    let mut rng = stream(77, Stream::Batch);
    let trials = 20_000;
    let mut mean = [0.0; 3];
    let mut sq = [0.0; 3];
    for _ in 0..trials {
        let mut w = WorkerState::new(0, 3, 0..40);
        w.outer_sync(&x0, &g0);
        let batch = sample_batch(&mut rng, 0..40, 4);
        let v = w.vr_update(&x1, &batch, &model, samples, &mut SfoCounter::default()).unwrap();
        for j in 0..3 {
            mean[j] += v[j] / trials as f64;
            sq[j] += v[j] * v[j] / trials as f64;
        }
    }
    for j in 0..3 {
        let sd = (sq[j] - mean[j] * mean[j]).max(0.0).sqrt();
        let se = sd / (trials as f64).sqrt();
        assert!((mean[j] - g1[j]).abs() <= 5.0 * se + 1e-12, "coord {j}: {} vs {}", mean[j], g1[j]);
    }
}

#[test]
fn step_rule_descends_on_average() {
    let diag = common::spread_diag(8, 0.2, 2.0);
    let model = common::quadratic(&diag);
    let data = synthesize(SynthKind::Quadratic { symmetric: false }, 256, 8, 5).unwrap();
    for delta in [0, 3] {
        let eta = auto_step(Architecture::Distributed, 2.0, delta);
        let mut cfg = RunConfig::new(delta + 1, delta, 16, 16, eta, 2000, 1);
        cfg.grid_points = 20;
        let t = run_synthesis_dm(&cfg, &model, &data).unwrap();
        let first = t.grid.first().unwrap().loss;
        let quarter = t.grid[t.grid.len() / 4].loss;
        let last = t.grid.last().unwrap().loss;
        assert!(quarter < first && last <= quarter * 1.0001, "{first} {quarter} {last}");
    }
}
