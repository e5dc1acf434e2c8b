//! Analytic gradients of every objective against central finite differences.

use dubrec_core::data::Interaction;
use dubrec_core::model::Gradient;
use dubrec_core::objective::{objective_terms, Batch, Gradients, Scale};
use dubrec_core::{FactorModel, LossKind, Method, MethodConfig, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_U: u32 = 4;
const N_I: u32 = 3;
const RANK: usize = 2;
const H: f64 = 1e-5;
const MAX_REL: f64 = 1e-4;

struct Case {
    observed: Vec<Interaction>,
    randomized: Vec<Interaction>,
    auxiliary: Vec<(u32, u32)>,
    mc: FactorModel,
    mt: FactorModel,
    cfg: MethodConfig,
}

fn random_model(rng: &mut ChaCha8Rng, std: f64) -> FactorModel {
    let n = FactorModel::param_len(N_U, N_I, RANK);
    let params = (0..n).map(|_| rng.random_range(-std..std)).collect();
    FactorModel::from_params(N_U, N_I, RANK, params).unwrap()
}

fn case(method: Method, loss: LossKind, seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Cover every user and item row so sparse L2 equals the full penalty gradient.
    let mut observed: Vec<Interaction> = (0..N_U.max(N_I))
        .map(|k| Interaction::new(k % N_U, k % N_I, rng.random_range(0..2)))
        .collect();
    for _ in 0..3 {
        observed.push(Interaction::new(rng.random_range(0..N_U), rng.random_range(0..N_I), rng.random_range(0..2)));
    }
    let randomized = (0..5)
        .map(|_| Interaction::new(rng.random_range(0..N_U), rng.random_range(0..N_I), rng.random_range(0..2)))
        .collect();
    let auxiliary = (0..6).map(|_| (rng.random_range(0..N_U), rng.random_range(0..N_I))).collect();
    let mut cfg = MethodConfig::new(method);
    cfg.loss = loss;
    cfg.gamma = rng.random_range(0.1..2.0);
    cfg.gamma_tc = rng.random_range(0.1..2.0);
    cfg.lambda_c = rng.random_range(0.01..0.5);
    cfg.lambda_t = rng.random_range(0.01..0.5);
    Case {
        observed,
        randomized,
        auxiliary,
        mc: random_model(&mut rng, 1.0),
        mt: random_model(&mut rng, 1.0),
        cfg,
    }
}

const SCALE: Scale = Scale {
    d_size: 12,
    observed_total: 6,
    randomized_total: 3,
    unobserved_total: 4,
};

fn objective(c: &Case, mc: &FactorModel, mt: &FactorModel) -> f64 {
    let batch = Batch {
        observed: &c.observed,
        randomized: &c.randomized,
        auxiliary: &c.auxiliary,
    };
    let mt = c.cfg.method.needs_model_t().then_some(mt);
    objective_terms(&c.cfg, mc, mt, &batch, &SCALE, Some((0.3, 0.6)), None)
        .unwrap()
        .total()
}

fn analytic(c: &Case) -> (Gradient, Gradient) {
    let batch = Batch {
        observed: &c.observed,
        randomized: &c.randomized,
        auxiliary: &c.auxiliary,
    };
    let mut gc = c.mc.new_gradient();
    let mut gt = c.mt.new_gradient();
    let mt = c.cfg.method.needs_model_t().then_some(&c.mt);
    objective_terms(
        &c.cfg,
        &c.mc,
        mt,
        &batch,
        &SCALE,
        Some((0.3, 0.6)),
        Some(Gradients {
            c: &mut gc,
            t: Some(&mut gt),
        }),
    )
    .unwrap();
    (gc, gt)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn worst_c(c: &Case, g: &Gradient) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..c.mc.params().len() {
        let mut plus = c.mc.clone();
        plus.params_mut()[k] += H;
        let mut minus = c.mc.clone();
        minus.params_mut()[k] -= H;
        let fd = (objective(c, &plus, &c.mt) - objective(c, &minus, &c.mt)) / (2.0 * H);
        worst = worst.max(rel_err(g.values()[k], fd));
    }
    worst
}

fn run(method: Method, loss: LossKind) {
    for trial in 0..100 {
        let c = case(method, loss, 1000 * method as u64 + trial);
        let (gc, _) = analytic(&c);
        let err = worst_c(&c, &gc);
        assert!(err < MAX_REL, "{method} {loss:?} trial {trial}: relative error {err:e}");
    }
}

#[test]
fn bce_gradients_match_finite_differences_for_every_method() {
    for m in Method::ALL {
        run(m, LossKind::bce());
    }
}

#[test]
fn mse_gradients_match_finite_differences_for_every_method() {
    for m in Method::ALL {
        run(m, LossKind::mse());
    }
}

#[test]
fn generalized_target_term_alone() {
    for trial in 0..100 {
        let mut c = case(Method::DubSeparability, LossKind::bce(), 50_000 + trial);
        c.cfg.dropped = vec![Term::A, Term::C, Term::D, Term::RegC];
        let (gc, _) = analytic(&c);
        let err = worst_c(&c, &gc);
        assert!(err < MAX_REL, "trial {trial}: {err:e}");
        assert!(!gc.is_zero());
    }
}

#[test]
fn cause_model_t_gradient_matches_finite_differences() {
    for trial in 0..100 {
        let c = case(Method::CausE, LossKind::bce(), 70_000 + trial);
        let (_, gt) = analytic(&c);
        for k in 0..c.mt.params().len() {
            let mut plus = c.mt.clone();
            plus.params_mut()[k] += H;
            let mut minus = c.mt.clone();
            minus.params_mut()[k] -= H;
            let fd = (objective(&c, &c.mc, &plus) - objective(&c, &c.mc, &minus)) / (2.0 * H);
            let err = rel_err(gt.values()[k], fd);
            assert!(err < MAX_REL, "trial {trial} param {k}: {err:e}");
        }
    }
}

#[test]
fn frozen_model_t_gets_no_gradient() {
    let c = case(Method::DubSeparability, LossKind::bce(), 3);
    let (_, gt) = analytic(&c);
    assert!(gt.is_zero());
}
