//! Exact evaluation of the ideal loss and of every upper-bound term on a
//! synthetic world, where both complete feedback matrices are known.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::data::{Dataset, PairSet};
use crate::loss::LossKind;
use crate::model::FactorModel;
use crate::rng;
use crate::world::SyntheticWorld;
use crate::{Error, Result};

/// Absolute slack allowed when checking a bound.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Number of resampled `S_t` draws used to estimate the expectation in the bias term.
pub const DEFAULT_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundVariant {
    /// For losses obeying the triangle inequality.
    Triangle,
    /// For losses obeying separability (BCE).
    Separability,
}

impl BoundVariant {
    pub fn name(self) -> &'static str {
        match self {
            BoundVariant::Triangle => "triangle",
            BoundVariant::Separability => "separability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundConfig {
    /// Upper bound `Delta` of the loss.
    pub delta: f64,
    /// Size `|H|` of the finite hypothesis space.
    pub hypothesis_count: usize,
    /// Failure probability `eta`.
    pub eta: f64,
}

impl BoundConfig {
    pub fn new(delta: f64, hypothesis_count: usize, eta: f64) -> Result<Self> {
        let cfg = Self {
            delta,
            hypothesis_count,
            eta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_loss(loss: &LossKind, hypothesis_count: usize, eta: f64) -> Result<Self> {
        Self::new(loss.max_value(), hypothesis_count, eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if self.hypothesis_count == 0 {
            return Err(Error::InvalidArgument("hypothesis count must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        Ok(())
    }
}

/// `Delta / |S_t| * sqrt(|D| / 2 * ln(2 |H| / eta))`.
pub fn hoeffding_term(cfg: &BoundConfig, s_t_size: usize, d_size: usize) -> Result<f64> {
    cfg.validate()?;
    if s_t_size == 0 {
        return Err(Error::InvalidArgument("|S_t| must be at least 1".into()));
    }
    let log = libm::log(2.0 * cfg.hypothesis_count as f64 / cfg.eta);
    Ok(cfg.delta / s_t_size as f64 * libm::sqrt(d_size as f64 / 2.0 * log))
}

fn check_dims(world: &SyntheticWorld, m: &FactorModel) -> Result<()> {
    if m.n_users() != world.n_users() || m.n_items() != world.n_items() {
        return Err(Error::ShapeMismatch(format!(
            "model {}x{} vs world {}x{}",
            m.n_users(),
            m.n_items(),
            world.n_users(),
            world.n_items()
        )));
    }
    Ok(())
}

/// `(1 / |D|) * sum over all pairs of l(r_t, predict(model_c))`.
pub fn ideal_loss(world: &SyntheticWorld, model_c: &FactorModel, loss: &LossKind) -> Result<f64> {
    check_dims(world, model_c)?;
    let mut sum = 0.0;
    for u in 0..world.n_users() {
        for i in 0..world.n_items() {
            sum += loss.eval(f64::from(world.r_t(u, i)), model_c.prob_raw(u, i))?;
        }
    }
    Ok(sum / world.d_size() as f64)
}

/// The five right-hand-side terms of the deterministic decomposition.
///
/// Triangle: `(a) L^{S_t}(R^t, R_hat^c)`, `(b) L^{S_c}(R^t, R^c)`,
/// `(c) L^{S_c}(R^c, R_hat^c)`, `(d) L^{S_u}(R_hat^t, R_hat^c)`,
/// `(e) L^{S_u}(R^t, R_hat^t)`.
///
/// Separability replaces `(b)` by `L^{S_c}(R^t - R^c, R_hat^c)` and `(e)` by
/// `L^{S_u}(R^t - R_hat^t, R_hat^c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropositionTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl PropositionTerms {
    pub fn total(&self) -> f64 {
        self.a + self.b + self.c + self.d + self.e
    }
}

/// Per-pair loss of the `S_t`-side term: `l(r_t, R_hat^t)` or `l(r_t - R_hat^t, R_hat^c)`.
fn e_loss(
    variant: BoundVariant,
    loss: &LossKind,
    r_t: f64,
    pc: f64,
    pt: f64,
) -> Result<f64> {
    match variant {
        BoundVariant::Triangle => loss.eval(r_t, pt),
        BoundVariant::Separability => loss.eval(r_t - pt, pc),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Unobserved,
    Observed,
    Randomized,
}

fn regions(world: &SyntheticWorld, s_c: &Dataset, s_t: &Dataset) -> Result<Vec<Region>> {
    let n_items = world.n_items() as usize;
    if s_c.n_users() != world.n_users()
        || s_c.n_items() != world.n_items()
        || !s_c.same_grid(s_t)
    {
        return Err(Error::ShapeMismatch("datasets do not match the world grid".into()));
    }
    let mut region = vec![Region::Unobserved; world.d_size()];
    for x in s_c.interactions() {
        region[x.user as usize * n_items + x.item as usize] = Region::Observed;
    }
    for x in s_t.interactions() {
        let r = &mut region[x.user as usize * n_items + x.item as usize];
        if *r == Region::Observed {
            return Err(Error::DataIntegrity(format!(
                "pair ({}, {}) is in both S_c and S_t",
                x.user, x.item
            )));
        }
        *r = Region::Randomized;
    }
    Ok(region)
}

/// Computes the decomposition terms over the full grid. Labels come from the
/// world, so stored dataset labels are not consulted.
pub fn proposition_terms(
    variant: BoundVariant,
    world: &SyntheticWorld,
    model_c: &FactorModel,
    model_t: &FactorModel,
    s_c: &Dataset,
    s_t: &Dataset,
    loss: &LossKind,
) -> Result<PropositionTerms> {
    check_dims(world, model_c)?;
    check_dims(world, model_t)?;
    let region = regions(world, s_c, s_t)?;
    let n_items = world.n_items();
    let mut t = PropositionTerms {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 0.0,
    };
    for u in 0..world.n_users() {
        for i in 0..n_items {
            let rt = f64::from(world.r_t(u, i));
            let rc = f64::from(world.r_c(u, i));
            let pc = model_c.prob_raw(u, i);
            match region[(u * n_items + i) as usize] {
                Region::Randomized => t.a += loss.eval(rt, pc)?,
                Region::Observed => {
                    t.c += loss.eval(rc, pc)?;
                    t.b += match variant {
                        BoundVariant::Triangle => loss.eval(rt, rc)?,
                        BoundVariant::Separability => loss.eval(rt - rc, pc)?,
                    };
                }
                Region::Unobserved => {
                    let pt = model_t.prob_raw(u, i);
                    t.d += loss.eval(loss.as_target(pt), pc)?;
                    t.e += e_loss(variant, loss, rt, pc, pt)?;
                }
            }
        }
    }
    let d = world.d_size() as f64;
    t.a /= d;
    t.b /= d;
    t.c /= d;
    t.d /= d;
    t.e /= d;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub variant: BoundVariant,
    pub lhs_ideal: f64,
    pub term_a: f64,
    pub term_b: f64,
    pub term_c: f64,
    pub term_d: f64,
    /// Realized `S_t` mean of the `e` loss.
    pub term_e: f64,
    /// Unobserved-set term minus the `S_t` mean averaged over resampled `S_t` draws.
    pub bias_term: f64,
    /// Unobserved-set term minus the realized `S_t` mean.
    pub bias_realized: f64,
    pub confidence_term: f64,
    pub rhs_total: f64,
    pub holds: bool,
    /// Whether `lhs <= a + b + c + d + e + confidence`.
    pub holds_without_bias: bool,
    /// The unobserved-set term the bias corrects for.
    pub unobserved_term: f64,
    /// Average `S_t` mean over the resampled draws.
    pub expected_e: f64,
}

impl BoundReport {
    /// Sum of the reported right-hand-side components.
    pub fn recomputed_total(&self) -> f64 {
        self.term_a
            + self.term_b
            + self.term_c
            + self.term_d
            + self.term_e
            + self.bias_term
            + self.confidence_term
    }
}

/// Mean of the `e` loss over `pairs`.
fn s_t_mean<I: Iterator<Item = (u32, u32)>>(
    variant: BoundVariant,
    world: &SyntheticWorld,
    model_c: &FactorModel,
    model_t: &FactorModel,
    loss: &LossKind,
    pairs: I,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (u, i) in pairs {
        let rt = f64::from(world.r_t(u, i));
        sum += e_loss(variant, loss, rt, model_c.prob_raw(u, i), model_t.prob_raw(u, i))?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("S_t is empty".into()));
    }
    Ok(sum / n as f64)
}

/// Assembles the probabilistic bound: terms (a) to (d), the realized `S_t`
/// term, the bias term, and the confidence term.
///
/// The expectation in the bias term is estimated by averaging the `S_t` mean
/// over `resamples` draws of `|S_t|` pairs taken uniformly from the pairs
/// outside `S_c`, seeded by `seed`.
#[allow(clippy::too_many_arguments)]
pub fn theorem_report(
    variant: BoundVariant,
    world: &SyntheticWorld,
    model_c: &FactorModel,
    model_t: &FactorModel,
    s_c: &Dataset,
    s_t: &Dataset,
    loss: &LossKind,
    cfg: &BoundConfig,
    resamples: usize,
    seed: u64,
) -> Result<BoundReport> {
    if resamples == 0 {
        return Err(Error::InvalidArgument("need at least one S_t resample".into()));
    }
    let lhs = ideal_loss(world, model_c, loss)?;
    let p = proposition_terms(variant, world, model_c, model_t, s_c, s_t, loss)?;
    let realized = s_t_mean(
        variant,
        world,
        model_c,
        model_t,
        loss,
        s_t.interactions().iter().map(|x| (x.user, x.item)),
    )?;
    let outside = PairSet::from_datasets(&[s_c])?;
    let available = world.d_size() - outside.len();
    if s_t.len() > available {
        return Err(Error::Insufficient {
            what: "pairs outside S_c",
            needed: s_t.len(),
            available,
        });
    }
    let mut rng = rng::seeded(seed);
    let n_items = u64::from(world.n_items());
    let mut expected = 0.0;
    for _ in 0..resamples {
        let draw = index::sample(&mut rng, available, s_t.len());
        let pairs = draw.into_iter().map(|r| {
            let key = outside.complement_key(r as u64);
            ((key / n_items) as u32, (key % n_items) as u32)
        });
        expected += s_t_mean(variant, world, model_c, model_t, loss, pairs)?;
    }
    expected /= resamples as f64;
    let confidence = hoeffding_term(cfg, s_t.len(), world.d_size())?;
    let bias = p.e - expected;
    let rhs = p.a + p.b + p.c + p.d + realized + bias + confidence;
    let rhs_plain = p.a + p.b + p.c + p.d + realized + confidence;
    Ok(BoundReport {
        variant,
        lhs_ideal: lhs,
        term_a: p.a,
        term_b: p.b,
        term_c: p.c,
        term_d: p.d,
        term_e: realized,
        bias_term: bias,
        bias_realized: p.e - realized,
        confidence_term: confidence,
        rhs_total: rhs,
        holds: lhs <= rhs + BOUND_TOLERANCE,
        holds_without_bias: lhs <= rhs_plain + BOUND_TOLERANCE,
        unobserved_term: p.e,
        expected_e: expected,
    })
}
