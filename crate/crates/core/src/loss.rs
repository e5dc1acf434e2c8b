//! Pointwise losses, the `|D|`-normalized partial loss, and samplers that check
//! the triangle-inequality and separability premises of a loss.

use alloc::format;

use rand::Rng as _;

use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;

/// Absolute slack allowed when checking an inequality between loss values.
pub const CHECK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossVariant {
    BinaryCrossEntropy,
    L1,
    Mse,
    ZeroOne,
}

/// A pointwise loss `l(y, y_hat)`: target first, prediction second.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossKind {
    pub variant: LossVariant,
    /// Probability floor applied to BCE predictions; `0 < clamp_eps < 0.5`.
    pub clamp_eps: f64,
}

impl LossKind {
    pub fn new(variant: LossVariant, clamp_eps: f64) -> Result<Self> {
        if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "clamp_eps must lie in (0, 0.5), got {clamp_eps}"
            )));
        }
        Ok(Self { variant, clamp_eps })
    }

    pub const fn bce() -> Self {
        Self {
            variant: LossVariant::BinaryCrossEntropy,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub const fn l1() -> Self {
        Self {
            variant: LossVariant::L1,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub const fn mse() -> Self {
        Self {
            variant: LossVariant::Mse,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub const fn zero_one() -> Self {
        Self {
            variant: LossVariant::ZeroOne,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.clamp_eps, 1.0 - self.clamp_eps)
    }

    /// Evaluates the loss.
    ///
    /// BCE uses `-(y ln p + (1 - y) ln(1 - p))` for any real `y`, which is what
    /// the difference targets `R^t - R_hat^t` need. 0-1 loss only accepts
    /// binary targets.
    pub fn eval(&self, y: f64, y_hat: f64) -> Result<f64> {
        Ok(match self.variant {
            LossVariant::BinaryCrossEntropy => {
                let p = self.clamp(y_hat);
                -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
            }
            LossVariant::L1 => (y - y_hat).abs(),
            LossVariant::Mse => (y - y_hat) * (y - y_hat),
            LossVariant::ZeroOne => {
                if y != 0.0 && y != 1.0 {
                    return Err(Error::Domain(format!(
                        "0-1 loss needs a binary target, got {y}"
                    )));
                }
                let hard = if y_hat >= 0.5 { 1.0 } else { 0.0 };
                if hard == y {
                    0.0
                } else {
                    1.0
                }
            }
        })
    }

    /// Converts a predicted probability into a value usable in the target slot.
    /// Identity except for 0-1 loss, whose targets are hard labels.
    pub fn as_target(&self, p: f64) -> f64 {
        match self.variant {
            LossVariant::ZeroOne => {
                if p >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => p,
        }
    }

    /// Derivative of the loss with respect to the logit `z`, where `p = sigmoid(z)`.
    ///
    /// For BCE this is `p - y` (for any real target). 0-1 loss has no useful
    /// gradient and is rejected.
    pub fn logit_grad(&self, y: f64, p: f64) -> Result<f64> {
        match self.variant {
            LossVariant::BinaryCrossEntropy => Ok(self.clamp(p) - y),
            LossVariant::L1 => {
                let s = if p > y {
                    1.0
                } else if p < y {
                    -1.0
                } else {
                    0.0
                };
                Ok(s * p * (1.0 - p))
            }
            LossVariant::Mse => Ok(2.0 * (p - y) * p * (1.0 - p)),
            LossVariant::ZeroOne => Err(Error::InvalidArgument(
                "0-1 loss cannot be minimized by gradient steps".into(),
            )),
        }
    }

    /// Upper bound `Delta` of the loss on binary targets and predictions in `[0, 1]`.
    pub fn max_value(&self) -> f64 {
        match self.variant {
            LossVariant::BinaryCrossEntropy => -libm::log(self.clamp_eps),
            LossVariant::L1 | LossVariant::Mse | LossVariant::ZeroOne => 1.0,
        }
    }
}

pub fn eval_loss(k: &LossKind, y: f64, y_hat: f64) -> Result<f64> {
    k.eval(y, y_hat)
}

pub fn max_value(k: &LossKind) -> f64 {
    k.max_value()
}

/// `(1 / denominator) * sum l(y, y_hat)` over `pairs`.
///
/// With `denominator = |D|` this is the partial loss `L^{S}`; with
/// `denominator = pairs.len()` it is the plain average.
pub fn partial_loss(k: &LossKind, pairs: &[(f64, f64)], denominator: usize) -> Result<f64> {
    if denominator == 0 {
        return Err(Error::InvalidArgument("partial loss denominator is zero".into()));
    }
    if pairs.len() > denominator {
        return Err(Error::InvalidArgument(format!(
            "denominator {denominator} smaller than {} pairs",
            pairs.len()
        )));
    }
    let mut sum = 0.0;
    for &(y, y_hat) in pairs {
        sum += k.eval(y, y_hat)?;
    }
    Ok(sum / denominator as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConstraintKind {
    /// `l(c, a) <= l(b, a) + l(c, b)`.
    Triangle,
    /// `l(c, a) <= l(b, a) + l(c - b, a)`.
    Separability,
}

/// One checked triple: `target = c`, `middle = b`, `prediction = a`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub target: f64,
    pub middle: f64,
    pub prediction: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; positive for a violation.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintReport {
    pub kind: ConstraintKind,
    pub loss: LossVariant,
    pub n_samples: usize,
    pub n_violations: usize,
    /// The largest-gap violation; present iff `n_violations > 0`.
    pub worst_violation: Option<Violation>,
}

impl ConstraintReport {
    fn new(kind: ConstraintKind, loss: LossVariant) -> Self {
        Self {
            kind,
            loss,
            n_samples: 0,
            n_violations: 0,
            worst_violation: None,
        }
    }

    fn record(&mut self, v: Violation) {
        self.n_samples += 1;
        if v.gap > CHECK_TOLERANCE {
            self.n_violations += 1;
            if self.worst_violation.is_none_or(|w| v.gap > w.gap) {
                self.worst_violation = Some(v);
            }
        }
    }

    pub fn holds(&self) -> bool {
        self.n_violations == 0
    }
}

/// Evaluates both sides of the triangle inequality for one triple.
pub fn triangle_triple(k: &LossKind, target: f64, middle: f64, prediction: f64) -> Result<Violation> {
    let lhs = k.eval(target, prediction)?;
    let rhs = k.eval(middle, prediction)? + k.eval(target, middle)?;
    Ok(Violation {
        target,
        middle,
        prediction,
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

/// Evaluates both sides of the separability inequality for one triple.
pub fn separability_triple(
    k: &LossKind,
    target: f64,
    middle: f64,
    prediction: f64,
) -> Result<Violation> {
    let lhs = k.eval(target, prediction)?;
    let rhs = k.eval(middle, prediction)? + k.eval(target - middle, prediction)?;
    Ok(Violation {
        target,
        middle,
        prediction,
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

fn open_unit(rng: &mut rng::Rng, eps: f64) -> f64 {
    eps + (1.0 - 2.0 * eps) * rng.random::<f64>()
}

fn bit(rng: &mut rng::Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        0.0
    }
}

/// Samples triples from the loss's domain and tests `l(c, a) <= l(b, a) + l(c, b)`.
///
/// The middle element occupies both a target and a prediction slot. For 0-1
/// loss targets and the middle element are binary; otherwise targets are a
/// fair mix of binary and uniform `[0, 1]` values and predictions are uniform
/// on `(eps, 1 - eps)`.
pub fn check_triangle(k: &LossKind, n_samples: usize, seed: u64) -> ConstraintReport {
    let mut rng = rng::seeded(seed);
    let mut report = ConstraintReport::new(ConstraintKind::Triangle, k.variant);
    for _ in 0..n_samples {
        let a = open_unit(&mut rng, k.clamp_eps);
        let (b, c) = if k.variant == LossVariant::ZeroOne {
            (bit(&mut rng), bit(&mut rng))
        } else {
            let b = open_unit(&mut rng, k.clamp_eps);
            let c = if rng.random::<bool>() {
                bit(&mut rng)
            } else {
                rng.random::<f64>()
            };
            (b, c)
        };
        let v = triangle_triple(k, c, b, a).expect("sampled triple lies in the loss domain");
        report.record(v);
    }
    report
}

/// Samples triples and tests `l(c, a) <= l(b, a) + l(c - b, a)`.
///
/// Targets `b, c` are uniform on `[-1, 1]` (the generalized targets that
/// differences of labels and predictions produce). For 0-1 loss, whose domain
/// is binary, `(c, b)` is drawn from the pairs whose difference stays binary.
pub fn check_separability(k: &LossKind, n_samples: usize, seed: u64) -> ConstraintReport {
    let mut rng = rng::seeded(seed);
    let mut report = ConstraintReport::new(ConstraintKind::Separability, k.variant);
    for _ in 0..n_samples {
        let a = open_unit(&mut rng, k.clamp_eps);
        let (b, c) = if k.variant == LossVariant::ZeroOne {
            [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)][rng.random_range(0..3)]
        } else {
            (
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            )
        };
        let v = separability_triple(k, c, b, a).expect("sampled triple lies in the loss domain");
        report.record(v);
    }
    report
}
