mod common;

use common::{diag_quadratic_grad, quadratic, spiderboost, spread_diag, svrg};
use vrsim_core::baselines::run_async_svrg;
use vrsim_core::data::{synthesize, SynthKind};
use vrsim_core::dm_sim::run_synthesis_dm;
use vrsim_core::{Architecture, ObjectiveModel, RunConfig, Sample};

#[test]
fn synthesis_matches_serial_spiderboost_on_quadratic() {
    let diag = spread_diag(6, 0.1, 2.0);
    let model = quadratic(&diag);
    let data = synthesize(SynthKind::Quadratic { symmetric: false }, 144, 6, 11).unwrap();
    let cfg = RunConfig::new(1, 0, 12, 12, 0.2, 600, 5);
    let trace = run_synthesis_dm(&cfg, &model, &data).unwrap();
    let grad = diag_quadratic_grad(&diag);
    let oracle = spiderboost(&grad, &data, 12, 12, 0.2, 600, 5);
    assert_eq!(trace.x_final.as_slice(), oracle.x_final());
    assert_eq!(trace.zeta, oracle.zeta);
    assert_eq!(trace.x_zeta.as_slice(), oracle.x_zeta());
}

#[test]
fn synthesis_matches_serial_spiderboost_on_logistic() {
    let model = ObjectiveModel::logistic(5, 0.01).unwrap();
    let data = synthesize(SynthKind::Logistic, 100, 5, 3).unwrap();
    let cfg = RunConfig::new(1, 0, 10, 10, 1.0, 500, 8);
    let trace = run_synthesis_dm(&cfg, &model, &data).unwrap();
    let grad = |x: &[f64], s: &Sample| model.grad(x, s).unwrap().into_vec();
    let oracle = spiderboost(&grad, &data, 10, 10, 1.0, 500, 8);
    assert_eq!(trace.x_final.as_slice(), oracle.x_final());
    for g in &trace.grid {
        let loss = model.full_loss(&oracle.iterates[g.k], data.samples()).unwrap();
        assert_eq!(g.loss, loss);
    }
}

#[test]
fn async_svrg_matches_serial_svrg() {
    let model = ObjectiveModel::logistic(4, 0.0).unwrap();
    let data = synthesize(SynthKind::Logistic, 81, 4, 6).unwrap();
    let cfg = RunConfig::new(1, 0, 9, 9, 0.8, 450, 2);
    let trace = run_async_svrg(Architecture::Distributed, &cfg, &model, &data).unwrap();
    let grad = |x: &[f64], s: &Sample| model.grad(x, s).unwrap().into_vec();
    let oracle = svrg(&grad, &data, 4, 9, 9, 0.8, 450, 2);
    assert_eq!(trace.x_final.as_slice(), oracle.x_final());
    assert_eq!(trace.x_zeta.as_slice(), oracle.x_zeta());
}

#[test]
fn delayed_runs_differ_from_serial() {
    let model = ObjectiveModel::logistic(4, 0.0).unwrap();
    let data = synthesize(SynthKind::Logistic, 81, 4, 6).unwrap();
    let cfg = RunConfig::new(3, 4, 9, 9, 0.8, 200, 2);
    let trace = run_synthesis_dm(&cfg, &model, &data).unwrap();
    let grad = |x: &[f64], s: &Sample| model.grad(x, s).unwrap().into_vec();
    let oracle = spiderboost(&grad, &data, 9, 9, 0.8, 200, 2);
    assert_ne!(trace.x_final.as_slice(), oracle.x_final());
}
