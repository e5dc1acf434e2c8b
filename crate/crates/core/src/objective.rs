//! Training objectives of the compared methods, assembled from named terms.
//!
//! Every data term is evaluated on mini-batches as an unbiased estimate of its
//! full-data value: a partial loss with denominator `|D|` over a set `S` of
//! size `n` is estimated as `(n / |D|)` times the batch mean.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{Dataset, Interaction};
use crate::loss::LossKind;
use crate::model::{FactorModel, Gradient};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    Naive,
    Unif,
    Combine,
    Ips,
    CausE,
    Bridge,
    DubTriangle,
    DubSeparability,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Naive,
        Method::Unif,
        Method::Combine,
        Method::Ips,
        Method::CausE,
        Method::Bridge,
        Method::DubTriangle,
        Method::DubSeparability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Unif => "unif",
            Method::Combine => "combine",
            Method::Ips => "ips",
            Method::CausE => "cause",
            Method::Bridge => "bridge",
            Method::DubTriangle => "dub-ti",
            Method::DubSeparability => "dub-sep",
        }
    }

    /// Methods whose objective involves a second model `M_t`.
    pub fn needs_model_t(self) -> bool {
        matches!(
            self,
            Method::CausE | Method::Bridge | Method::DubTriangle | Method::DubSeparability
        )
    }

    /// Methods that update `M_t` during refinement.
    pub fn updates_model_t(self) -> bool {
        matches!(self, Method::CausE | Method::Bridge | Method::DubTriangle)
    }

    /// Methods with an alignment weight `gamma` (or `gamma_tc` for CausE).
    pub fn uses_gamma(self) -> bool {
        self.needs_model_t()
    }

    /// Terms that make up this method's objective before any are dropped.
    pub fn terms(self) -> &'static [Term] {
        use Term::*;
        match self {
            Method::Naive | Method::Unif | Method::Combine => &[Supervised, RegC],
            Method::Ips => &[Ips, RegC],
            Method::CausE => &[C, E1, ParamAlign, RegC, RegT],
            Method::Bridge => &[C, E1, D, RegC, RegT],
            Method::DubTriangle => &[A, C, E1, D, RegC, RegT],
            Method::DubSeparability => &[A, C, E2, D, RegC],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match norm.as_str() {
            "naive" => Method::Naive,
            "unif" => Method::Unif,
            "combine" => Method::Combine,
            "ips" => Method::Ips,
            "cause" => Method::CausE,
            "bridge" => Method::Bridge,
            "dubti" | "dubtriangle" => Method::DubTriangle,
            "dubsep" | "dubseparability" => Method::DubSeparability,
            _ => return Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        })
    }
}

/// A named objective component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Term {
    /// Plain mean loss on the training data (Naive, Unif, Combine).
    Supervised,
    /// Propensity-weighted loss on `S_c` with denominator `|D|`.
    Ips,
    /// `L^{S_t}(R^t, R_hat^c)`.
    A,
    /// `L^{S_c}(R^c, R_hat^c)`.
    C,
    /// `L^{S_u}(R_hat^t, R_hat^c)`, weighted by `gamma`; `M_t` is the target.
    D,
    /// Mean of `l(R^t, R_hat^t)` over `S_t`.
    E1,
    /// Mean of `l(R^t - R_hat^t, R_hat^c)` over `S_t`.
    E2,
    /// `gamma_tc ||W_t - W_c||_F`.
    ParamAlign,
    RegC,
    RegT,
}

impl Term {
    pub const COUNT: usize = 10;

    pub const ALL: [Term; Term::COUNT] = [
        Term::Supervised,
        Term::Ips,
        Term::A,
        Term::C,
        Term::D,
        Term::E1,
        Term::E2,
        Term::ParamAlign,
        Term::RegC,
        Term::RegT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Supervised => "supervised",
            Term::Ips => "ips",
            Term::A => "a",
            Term::C => "c",
            Term::D => "d",
            Term::E1 => "e1",
            Term::E2 => "e2",
            Term::ParamAlign => "param_align",
            Term::RegC => "reg_c",
            Term::RegT => "reg_t",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.trim_start_matches("term").trim().trim_matches(|c| c == '(' || c == ')');
        Ok(match t.replace('.', "").as_str() {
            "supervised" => Term::Supervised,
            "ips" => Term::Ips,
            "a" => Term::A,
            "c" => Term::C,
            "d" => Term::D,
            "e1" => Term::E1,
            "e2" => Term::E2,
            "param_align" | "paramalign" => Term::ParamAlign,
            "reg_c" | "regc" => Term::RegC,
            "reg_t" | "regt" => Term::RegT,
            _ => return Err(Error::InvalidArgument(format!("unknown term `{s}`"))),
        })
    }
}

/// How the sampled alignment batch is scaled into term (d).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AlignmentScaling {
    /// `(|S_u| / |D|)` times the batch mean, matching the `|D|` denominator.
    UnobservedFraction,
    /// Plain batch mean.
    PlainMean,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodConfig {
    pub method: Method,
    pub gamma: f64,
    pub lambda_c: f64,
    pub lambda_t: f64,
    pub gamma_tc: f64,
    pub loss: LossKind,
    /// Terms forced to zero (ablations).
    pub dropped: Vec<Term>,
    pub alignment: AlignmentScaling,
    pub propensity_floor: f64,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            gamma: 1e-3,
            lambda_c: 1e-4,
            lambda_t: 1e-4,
            gamma_tc: 1e-3,
            loss: LossKind::bce(),
            dropped: Vec::new(),
            alignment: AlignmentScaling::UnobservedFraction,
            propensity_floor: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("lambda_c", self.lambda_c),
            ("lambda_t", self.lambda_t),
            ("gamma_tc", self.gamma_tc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.propensity_floor > 0.0 && self.propensity_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "propensity floor must lie in (0, 1], got {}",
                self.propensity_floor
            )));
        }
        if let Some(t) = self.dropped.iter().find(|t| !self.method.terms().contains(t)) {
            return Err(Error::InvalidArgument(format!(
                "term `{t}` is not part of the {} objective",
                self.method
            )));
        }
        Ok(())
    }

    pub fn is_active(&self, term: Term) -> bool {
        self.method.terms().contains(&term) && !self.dropped.contains(&term)
    }
}

/// Totals the mini-batch estimates are scaled against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub d_size: usize,
    /// `|S_c|`, or the size of the training set for single-set methods.
    pub observed_total: usize,
    pub randomized_total: usize,
    /// `|S_u| = |D| - |S_c union S_t|`.
    pub unobserved_total: usize,
}

impl Scale {
    pub fn from_sets(s_c: &Dataset, s_t: &Dataset) -> Self {
        let d = s_c.d_size();
        let overlap = s_c.sorted_keys();
        let dup = s_t
            .sorted_keys()
            .iter()
            .filter(|k| overlap.binary_search(k).is_ok())
            .count();
        Self {
            d_size: d,
            observed_total: s_c.len(),
            randomized_total: s_t.len(),
            unobserved_total: d - (s_c.len() + s_t.len() - dup),
        }
    }
}

/// One step's worth of data.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    /// Batch from `S_c` (or from the single training set).
    pub observed: &'a [Interaction],
    pub randomized: &'a [Interaction],
    /// Unlabelled pairs sampled from `S_u`.
    pub auxiliary: &'a [(u32, u32)],
}

/// Value of every named term; inactive terms are exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TermValues {
    values: [f64; Term::COUNT],
}

impl TermValues {
    pub fn get(&self, t: Term) -> f64 {
        self.values[t.index()]
    }

    pub fn set(&mut self, t: Term, v: f64) {
        self.values[t.index()] = v;
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Term, f64)> + '_ {
        Term::ALL.iter().map(move |&t| (t, self.get(t)))
    }

    pub fn add_scaled(&mut self, other: &TermValues, w: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += w * b;
        }
    }
}

/// Gradient sinks. `t` may be `None` when `M_t` is frozen or absent.
#[derive(Debug)]
pub struct Gradients<'g> {
    pub c: &'g mut Gradient,
    pub t: Option<&'g mut Gradient>,
}

/// Propensity `p_y = P(y | O=1) P(O=1) / P(y)`, clipped below at `floor`.
pub fn propensity_from_rates(p_y_given_observed: f64, p_observed: f64, p_y: f64, floor: f64) -> Result<f64> {
    if p_y <= 0.0 {
        return Err(Error::InvalidArgument("label prior is zero".into()));
    }
    Ok((p_y_given_observed * p_observed / p_y).max(floor))
}

/// Naive-Bayes propensities `(p_0, p_1)` from label frequencies in `S_c` and `S_t`.
pub fn naive_bayes_propensity(s_c: &Dataset, s_t: &Dataset, d_size: usize, floor: f64) -> Result<(f64, f64)> {
    if s_c.is_empty() {
        return Err(Error::Insufficient {
            what: "non-randomized interactions",
            needed: 1,
            available: 0,
        });
    }
    let pos_t = s_t.positives();
    let neg_t = s_t.negatives();
    if pos_t == 0 || neg_t == 0 {
        return Err(Error::InvalidArgument(format!(
            "randomized set needs both labels (positives {pos_t}, negatives {neg_t})"
        )));
    }
    let p_obs = s_c.len() as f64 / d_size as f64;
    let nc = s_c.len() as f64;
    let nt = s_t.len() as f64;
    let p0 = propensity_from_rates(s_c.negatives() as f64 / nc, p_obs, neg_t as f64 / nt, floor)?;
    let p1 = propensity_from_rates(s_c.positives() as f64 / nc, p_obs, pos_t as f64 / nt, floor)?;
    Ok((p0, p1))
}

struct Ctx<'a, 'g> {
    loss: &'a LossKind,
    grads: Option<Gradients<'g>>,
}

impl Ctx<'_, '_> {
    /// `scale * mean over examples of l(target, M(u, i))`, gradient into `sink`.
    fn mean_term<I>(&mut self, model: &FactorModel, to_t: bool, scale: f64, n: usize, examples: I) -> Result<f64>
    where
        I: Iterator<Item = (u32, u32, f64, f64)>,
    {
        if n == 0 || scale == 0.0 {
            return Ok(0.0);
        }
        let w = scale / n as f64;
        let mut sum = 0.0;
        let sink = match self.grads.as_mut() {
            Some(g) if to_t => g.t.as_deref_mut(),
            Some(g) => Some(&mut *g.c),
            None => None,
        };
        match sink {
            Some(grad) => {
                for (u, i, y, wi) in examples {
                    let p = model.predict(u, i)?;
                    sum += wi * self.loss.eval(y, p)?;
                    model.backprop(grad, u, i, w * wi * self.loss.logit_grad(y, p)?);
                }
            }
            None => {
                for (u, i, y, wi) in examples {
                    sum += wi * self.loss.eval(y, model.predict(u, i)?)?;
                }
            }
        }
        Ok(w * sum)
    }
}

fn labelled(b: &[Interaction]) -> impl Iterator<Item = (u32, u32, f64, f64)> + '_ {
    b.iter().map(|x| (x.user, x.item, x.target(), 1.0))
}

/// Evaluates the method's objective on one batch and, when `grads` is given,
/// accumulates gradients for the models the method updates.
///
/// `M_t`'s predictions enter terms (d) and (e.2) as constant targets. L2
/// gradients cover the rows the batch touched; the reported regularization
/// values are the full penalties.
pub fn objective_terms(
    cfg: &MethodConfig,
    model_c: &FactorModel,
    model_t: Option<&FactorModel>,
    batch: &Batch<'_>,
    scale: &Scale,
    propensities: Option<(f64, f64)>,
    grads: Option<Gradients<'_>>,
) -> Result<TermValues> {
    let method = cfg.method;
    let mt = match (method.needs_model_t(), model_t) {
        (true, None) => {
            return Err(Error::InvalidArgument(format!("{method} needs a second model")));
        }
        (true, Some(m)) => {
            if !m.same_shape(model_c) && cfg.is_active(Term::ParamAlign) {
                return Err(Error::ShapeMismatch("CausE needs equal model shapes".into()));
            }
            Some(m)
        }
        (false, _) => None,
    };
    if scale.d_size == 0 {
        return Err(Error::InvalidArgument("|D| is zero".into()));
    }
    let d = scale.d_size as f64;
    let mut out = TermValues::default();
    let mut ctx = Ctx { loss: &cfg.loss, grads };
    if let Some(g) = ctx.grads.as_mut() {
        if !method.updates_model_t() {
            g.t = None;
        }
    }

    if cfg.is_active(Term::Supervised) {
        let v = ctx.mean_term(model_c, false, 1.0, batch.observed.len(), labelled(batch.observed))?;
        out.set(Term::Supervised, v);
    }
    if cfg.is_active(Term::Ips) {
        let (p0, p1) = propensities
            .ok_or_else(|| Error::InvalidArgument("IPS needs propensities".into()))?;
        let it = batch.observed.iter().map(|x| {
            let p = if x.is_positive() { p1 } else { p0 };
            (x.user, x.item, x.target(), 1.0 / p)
        });
        let s = scale.observed_total as f64 / d;
        out.set(Term::Ips, ctx.mean_term(model_c, false, s, batch.observed.len(), it)?);
    }
    if cfg.is_active(Term::C) {
        let s = scale.observed_total as f64 / d;
        let v = ctx.mean_term(model_c, false, s, batch.observed.len(), labelled(batch.observed))?;
        out.set(Term::C, v);
    }
    if cfg.is_active(Term::A) {
        let s = scale.randomized_total as f64 / d;
        let v = ctx.mean_term(model_c, false, s, batch.randomized.len(), labelled(batch.randomized))?;
        out.set(Term::A, v);
    }
    if cfg.is_active(Term::E1) {
        let mt = mt.expect("checked above");
        let v = ctx.mean_term(mt, true, 1.0, batch.randomized.len(), labelled(batch.randomized))?;
        out.set(Term::E1, v);
    }
    if cfg.is_active(Term::E2) {
        let mt = mt.expect("checked above");
        let mut targets = Vec::with_capacity(batch.randomized.len());
        for x in batch.randomized {
            targets.push((x.user, x.item, x.target() - mt.predict(x.user, x.item)?, 1.0));
        }
        let v = ctx.mean_term(model_c, false, 1.0, targets.len(), targets.into_iter())?;
        out.set(Term::E2, v);
    }
    if cfg.is_active(Term::D) {
        let mt = mt.expect("checked above");
        let s = cfg.gamma
            * match cfg.alignment {
                AlignmentScaling::UnobservedFraction => scale.unobserved_total as f64 / d,
                AlignmentScaling::PlainMean => 1.0,
            };
        let mut targets = Vec::with_capacity(batch.auxiliary.len());
        for &(u, i) in batch.auxiliary {
            targets.push((u, i, cfg.loss.as_target(mt.predict(u, i)?), 1.0));
        }
        let v = ctx.mean_term(model_c, false, s, targets.len(), targets.into_iter())?;
        out.set(Term::D, v);
    }
    if cfg.is_active(Term::ParamAlign) {
        let mt = mt.expect("checked above");
        out.set(Term::ParamAlign, cfg.gamma_tc * model_c.param_distance(mt)?);
        if let Some(g) = ctx.grads.as_mut() {
            model_c.add_distance_grad(g.c, mt, cfg.gamma_tc)?;
            if let Some(gt) = g.t.as_deref_mut() {
                mt.add_distance_grad(gt, model_c, cfg.gamma_tc)?;
            }
        }
    }
    if cfg.is_active(Term::RegC) {
        out.set(Term::RegC, model_c.regularization_value(cfg.lambda_c));
        if let Some(g) = ctx.grads.as_mut() {
            model_c.add_l2_grad(g.c, cfg.lambda_c);
        }
    }
    if cfg.is_active(Term::RegT) {
        let mt = mt.expect("checked above");
        out.set(Term::RegT, mt.regularization_value(cfg.lambda_t));
        if let Some(g) = ctx.grads.as_mut() {
            if let Some(gt) = g.t.as_deref_mut() {
                mt.add_l2_grad(gt, cfg.lambda_t);
            }
        }
    }
    Ok(out)
}
