//! Matrix-factorization backbone with sigmoid output and an Adam optimizer.
//!
//! Parameters live in one flat buffer laid out as
//! `[user_factors | item_factors | user_bias | item_bias | global_bias]`,
//! which keeps gradients, moments, checkpoints and Frobenius distances simple.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::loss::{LossKind, DEFAULT_CLAMP_EPS};
use crate::rng;
use crate::{Error, Result};

pub const INIT_STD: f64 = 0.01;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorModel {
    n_users: u32,
    n_items: u32,
    rank: usize,
    clamp_eps: f64,
    params: Vec<f64>,
}

impl FactorModel {
    /// Factors i.i.d. `N(0, 0.01^2)`, biases zero.
    pub fn init(n_users: u32, n_items: u32, rank: usize, seed: u64) -> Result<Self> {
        Self::with_scale(n_users, n_items, rank, INIT_STD, 0.0, seed)
    }

    /// Factors drawn with standard deviation `factor_std` and biases with `bias_std`.
    pub fn with_scale(
        n_users: u32,
        n_items: u32,
        rank: usize,
        factor_std: f64,
        bias_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut m = Self::zeros(n_users, n_items, rank)?;
        let mut rng = rng::seeded(seed);
        let nf = m.n_factor_params();
        if factor_std > 0.0 {
            let normal = Normal::new(0.0, factor_std)
                .map_err(|e| Error::InvalidArgument(format!("factor std: {e}")))?;
            for p in &mut m.params[..nf] {
                *p = normal.sample(&mut rng);
            }
        }
        if bias_std > 0.0 {
            let normal = Normal::new(0.0, bias_std)
                .map_err(|e| Error::InvalidArgument(format!("bias std: {e}")))?;
            for p in &mut m.params[nf..] {
                *p = normal.sample(&mut rng);
            }
        }
        Ok(m)
    }

    pub fn zeros(n_users: u32, n_items: u32, rank: usize) -> Result<Self> {
        if n_users == 0 || n_items == 0 {
            return Err(Error::InvalidArgument("model needs at least one user and item".into()));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        let len = Self::param_len(n_users, n_items, rank);
        Ok(Self {
            n_users,
            n_items,
            rank,
            clamp_eps: DEFAULT_CLAMP_EPS,
            params: vec![0.0; len],
        })
    }

    /// Rebuilds a model from a flat parameter buffer in the documented layout.
    pub fn from_params(n_users: u32, n_items: u32, rank: usize, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(n_users, n_items, rank)?;
        if params.len() != m.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                m.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        m.params = params;
        Ok(m)
    }

    pub fn param_len(n_users: u32, n_items: u32, rank: usize) -> usize {
        (n_users as usize + n_items as usize) * (rank + 1) + 1
    }

    pub fn with_clamp_eps(mut self, clamp_eps: f64) -> Result<Self> {
        LossKind::new(crate::LossVariant::BinaryCrossEntropy, clamp_eps)?;
        self.clamp_eps = clamp_eps;
        Ok(self)
    }

    pub fn n_users(&self) -> u32 {
        self.n_users
    }

    pub fn n_items(&self) -> u32 {
        self.n_items
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_factor_params(&self) -> usize {
        (self.n_users as usize + self.n_items as usize) * self.rank
    }

    #[inline]
    fn user_row(&self, u: u32) -> usize {
        u as usize * self.rank
    }

    #[inline]
    fn item_row(&self, i: u32) -> usize {
        (self.n_users as usize + i as usize) * self.rank
    }

    #[inline]
    fn user_bias_idx(&self, u: u32) -> usize {
        self.n_factor_params() + u as usize
    }

    #[inline]
    fn item_bias_idx(&self, i: u32) -> usize {
        self.n_factor_params() + self.n_users as usize + i as usize
    }

    #[inline]
    fn global_idx(&self) -> usize {
        self.params.len() - 1
    }

    pub fn user_factors(&self, u: u32) -> &[f64] {
        let s = self.user_row(u);
        &self.params[s..s + self.rank]
    }

    pub fn item_factors(&self, i: u32) -> &[f64] {
        let s = self.item_row(i);
        &self.params[s..s + self.rank]
    }

    pub fn user_bias(&self, u: u32) -> f64 {
        self.params[self.user_bias_idx(u)]
    }

    pub fn item_bias(&self, i: u32) -> f64 {
        self.params[self.item_bias_idx(i)]
    }

    pub fn global_bias(&self) -> f64 {
        self.params[self.global_idx()]
    }

    pub fn set_user_bias(&mut self, u: u32, v: f64) {
        let k = self.user_bias_idx(u);
        self.params[k] = v;
    }

    pub fn set_item_bias(&mut self, i: u32, v: f64) {
        let k = self.item_bias_idx(i);
        self.params[k] = v;
    }

    pub fn set_global_bias(&mut self, v: f64) {
        let k = self.global_idx();
        self.params[k] = v;
    }

    pub fn user_factors_mut(&mut self, u: u32) -> &mut [f64] {
        let s = self.user_row(u);
        &mut self.params[s..s + self.rank]
    }

    pub fn item_factors_mut(&mut self, i: u32) -> &mut [f64] {
        let s = self.item_row(i);
        &mut self.params[s..s + self.rank]
    }

    fn check_index(&self, u: u32, i: u32) -> Result<()> {
        if u >= self.n_users {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: u as usize,
                len: self.n_users as usize,
            });
        }
        if i >= self.n_items {
            return Err(Error::IndexOutOfRange {
                what: "item",
                index: i as usize,
                len: self.n_items as usize,
            });
        }
        Ok(())
    }

    /// Unchecked logit; callers guarantee valid indices.
    #[inline]
    pub(crate) fn logit_raw(&self, u: u32, i: u32) -> f64 {
        let pu = self.user_row(u);
        let qi = self.item_row(i);
        let mut dot = 0.0;
        for k in 0..self.rank {
            dot += self.params[pu + k] * self.params[qi + k];
        }
        dot + self.params[self.user_bias_idx(u)]
            + self.params[self.item_bias_idx(i)]
            + self.params[self.global_idx()]
    }

    #[inline]
    pub(crate) fn prob_raw(&self, u: u32, i: u32) -> f64 {
        sigmoid(self.logit_raw(u, i)).clamp(self.clamp_eps, 1.0 - self.clamp_eps)
    }

    pub fn logit(&self, u: u32, i: u32) -> Result<f64> {
        self.check_index(u, i)?;
        Ok(self.logit_raw(u, i))
    }

    /// Clamped probability in `[clamp_eps, 1 - clamp_eps]`.
    pub fn predict(&self, u: u32, i: u32) -> Result<f64> {
        self.check_index(u, i)?;
        Ok(self.prob_raw(u, i))
    }

    /// `lambda` times the squared Frobenius norm of every parameter block.
    pub fn regularization_value(&self, lambda: f64) -> f64 {
        lambda * self.params.iter().map(|p| p * p).sum::<f64>()
    }

    pub fn same_shape(&self, other: &FactorModel) -> bool {
        self.n_users == other.n_users && self.n_items == other.n_items && self.rank == other.rank
    }

    fn check_shape(&self, other: &FactorModel) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "models {}x{} rank {} and {}x{} rank {}",
                self.n_users, self.n_items, self.rank, other.n_users, other.n_items, other.rank
            )))
        }
    }

    /// Frobenius norm of the elementwise parameter difference.
    pub fn param_distance(&self, other: &FactorModel) -> Result<f64> {
        self.check_shape(other)?;
        let s: f64 = self
            .params
            .iter()
            .zip(&other.params)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(libm::sqrt(s))
    }

    pub fn new_gradient(&self) -> Gradient {
        Gradient {
            values: vec![0.0; self.params.len()],
            user_touched: vec![false; self.n_users as usize],
            item_touched: vec![false; self.n_items as usize],
            touched_users: Vec::new(),
            touched_items: Vec::new(),
            all_touched: false,
        }
    }

    /// Adds `dlogit * d logit(u, i) / d theta` to `grad` and marks the rows touched.
    #[inline]
    pub fn backprop(&self, grad: &mut Gradient, u: u32, i: u32, dlogit: f64) {
        grad.touch(u, i);
        let pu = self.user_row(u);
        let qi = self.item_row(i);
        for k in 0..self.rank {
            grad.values[pu + k] += dlogit * self.params[qi + k];
            grad.values[qi + k] += dlogit * self.params[pu + k];
        }
        grad.values[self.user_bias_idx(u)] += dlogit;
        grad.values[self.item_bias_idx(i)] += dlogit;
        let g = self.global_idx();
        grad.values[g] += dlogit;
    }

    /// Adds the gradient `2 lambda theta` of `lambda ||theta||^2`, restricted to
    /// the parameter rows touched so far (all rows after [`Gradient::touch_all`]).
    pub fn add_l2_grad(&self, grad: &mut Gradient, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let c = 2.0 * lambda;
        if grad.all_touched {
            for (g, p) in grad.values.iter_mut().zip(&self.params) {
                *g += c * p;
            }
            return;
        }
        let r = self.rank;
        for &u in &grad.touched_users {
            let s = self.user_row(u);
            for k in s..s + r {
                grad.values[k] += c * self.params[k];
            }
            let b = self.user_bias_idx(u);
            grad.values[b] += c * self.params[b];
        }
        for &i in &grad.touched_items {
            let s = self.item_row(i);
            for k in s..s + r {
                grad.values[k] += c * self.params[k];
            }
            let b = self.item_bias_idx(i);
            grad.values[b] += c * self.params[b];
        }
        if !grad.touched_users.is_empty() {
            let g = self.global_idx();
            grad.values[g] += c * self.params[g];
        }
    }

    /// Adds `scale * (self - other) / ||self - other||_F`, the gradient of
    /// `scale * param_distance` with respect to `self`. Zero when the models coincide.
    pub fn add_distance_grad(&self, grad: &mut Gradient, other: &FactorModel, scale: f64) -> Result<()> {
        let d = self.param_distance(other)?;
        grad.touch_all();
        if d == 0.0 || scale == 0.0 {
            return Ok(());
        }
        let c = scale / d;
        for ((g, a), b) in grad.values.iter_mut().zip(&self.params).zip(&other.params) {
            *g += c * (a - b);
        }
        Ok(())
    }
}

/// Dense gradient buffer with a record of which user and item rows were touched.
#[derive(Debug, Clone)]
pub struct Gradient {
    values: Vec<f64>,
    user_touched: Vec<bool>,
    item_touched: Vec<bool>,
    touched_users: Vec<u32>,
    touched_items: Vec<u32>,
    all_touched: bool,
}

impl Gradient {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn touch(&mut self, u: u32, i: u32) {
        if !self.user_touched[u as usize] {
            self.user_touched[u as usize] = true;
            self.touched_users.push(u);
        }
        if !self.item_touched[i as usize] {
            self.item_touched[i as usize] = true;
            self.touched_items.push(i);
        }
    }

    /// Marks every parameter as touched (used by whole-model penalties).
    pub fn touch_all(&mut self) {
        self.all_touched = true;
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for &u in &self.touched_users {
            self.user_touched[u as usize] = false;
        }
        for &i in &self.touched_items {
            self.item_touched[i as usize] = false;
        }
        self.touched_users.clear();
        self.touched_items.clear();
        self.all_touched = false;
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(model: &FactorModel, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let n = model.params.len();
        Ok(Self {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }

    /// One bias-corrected Adam update of `model` along `grad`.
    pub fn step(&mut self, model: &mut FactorModel, grad: &Gradient) -> Result<()> {
        if grad.values.len() != model.params.len() || self.first_moment.len() != model.params.len() {
            return Err(Error::ShapeMismatch("gradient, optimizer and model sizes differ".into()));
        }
        if let Some(k) = grad.values.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient at parameter {k} after {} steps",
                self.step_count
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (((p, g), m), v) in model
            .params
            .iter_mut()
            .zip(&grad.values)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * mhat / (libm::sqrt(vhat) + eps);
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite parameter after step {}",
                self.step_count
            )));
        }
        Ok(())
    }
}

/// One weighted example: user, item, target `y` in `[-1, 1]`, weight `w`.
pub type Example = (u32, u32, f64, f64);

/// Accumulates the gradient of `sum w * loss(y, predict(u, i))` into `grad`
/// and returns that sum.
pub fn accumulate(
    model: &FactorModel,
    grad: &mut Gradient,
    batch: &[Example],
    loss: &LossKind,
) -> Result<f64> {
    let mut value = 0.0;
    for &(u, i, y, w) in batch {
        model.check_index(u, i)?;
        if !w.is_finite() {
            return Err(Error::Numerical(format!("non-finite weight for ({u}, {i})")));
        }
        let p = model.prob_raw(u, i);
        value += w * loss.eval(y, p)?;
        model.backprop(grad, u, i, w * loss.logit_grad(y, p)?);
    }
    Ok(value)
}

/// Gradient of `sum w * loss(...) + lambda ||theta||^2` (L2 on touched rows),
/// followed by one Adam step. Returns the data-term value before the update.
pub fn grad_step(
    model: &mut FactorModel,
    opt: &mut OptimizerState,
    batch: &[Example],
    loss: &LossKind,
    lambda: f64,
) -> Result<f64> {
    let mut grad = model.new_gradient();
    let value = accumulate(model, &mut grad, batch, loss)?;
    model.add_l2_grad(&mut grad, lambda);
    opt.step(model, &grad)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn init_shapes_and_determinism() {
        let m = FactorModel::init(7, 5, 50, 3).unwrap();
        assert_eq!(m.user_factors(6).len(), 50);
        assert_eq!(m.params().len(), (7 + 5) * 51 + 1);
        assert_eq!(m, FactorModel::init(7, 5, 50, 3).unwrap());
        assert_ne!(m, FactorModel::init(7, 5, 50, 4).unwrap());
        assert_eq!(m.user_bias(0), 0.0);
        assert_eq!(m.global_bias(), 0.0);
        let sd = libm::sqrt(
            m.params()[..12 * 50].iter().map(|p| p * p).sum::<f64>() / 600.0,
        );
        assert!(sd > 0.008 && sd < 0.012, "sd={sd}");
    }

    #[test]
    fn predict_closed_forms() {
        let mut m = FactorModel::zeros(2, 2, 1).unwrap();
        assert_eq!(m.predict(1, 1).unwrap(), 0.5);
        m.user_factors_mut(0)[0] = 1.0;
        m.item_factors_mut(1)[0] = 1.0;
        assert!(close(m.predict(0, 1).unwrap(), 0.731059, 1e-6));
        m.set_global_bias(1e6);
        assert_eq!(m.predict(0, 0).unwrap(), 1.0 - DEFAULT_CLAMP_EPS);
        m.set_global_bias(-1e6);
        assert_eq!(m.predict(0, 0).unwrap(), DEFAULT_CLAMP_EPS);
        assert!(matches!(m.predict(2, 0), Err(Error::IndexOutOfRange { what: "user", .. })));
        assert!(matches!(m.predict(0, 2), Err(Error::IndexOutOfRange { what: "item", .. })));
    }

    #[test]
    fn single_example_logit_gradient() {
        let m = FactorModel::zeros(1, 1, 1).unwrap();
        let mut g = m.new_gradient();
        accumulate(&m, &mut g, &[(0, 0, 1.0, 1.0)], &LossKind::bce()).unwrap();
        assert_eq!(g.values()[m.global_idx()], -0.5);
    }

    #[test]
    fn zero_weight_batch_only_shrinks() {
        let mut m = FactorModel::with_scale(3, 3, 2, 0.5, 0.5, 1).unwrap();
        let before = m.clone();
        let mut opt = OptimizerState::new(&m, 1e-3).unwrap();
        grad_step(&mut m, &mut opt, &[(0, 0, 1.0, 0.0)], &LossKind::bce(), 0.0).unwrap();
        assert_eq!(m, before);
        grad_step(&mut m, &mut opt, &[(0, 0, 1.0, 0.0)], &LossKind::bce(), 0.1).unwrap();
        for (k, (a, b)) in m.params().iter().zip(before.params()).enumerate() {
            if k == m.user_row(0) || k == m.item_row(0) || k == m.user_bias_idx(0) {
                assert!(a.abs() < b.abs());
            }
        }
        assert_eq!(m.user_factors(1), before.user_factors(1));
    }

    #[test]
    fn regularization_values() {
        let m = FactorModel::zeros(2, 2, 1).unwrap();
        assert_eq!(m.regularization_value(0.3), 0.0);
        let mut m = m;
        m.set_global_bias(2.0);
        assert!(close(m.regularization_value(0.1), 0.4, 1e-15));
        let mut r = FactorModel::with_scale(4, 3, 2, 1.0, 1.0, 2).unwrap();
        let v = r.regularization_value(0.5);
        r.params_mut().iter_mut().for_each(|p| *p *= 2.0);
        assert!(close(r.regularization_value(0.5), 4.0 * v, 1e-12));
    }

    #[test]
    fn distance() {
        let a = FactorModel::with_scale(3, 3, 2, 1.0, 1.0, 5).unwrap();
        assert_eq!(a.param_distance(&a).unwrap(), 0.0);
        let mut b = a.clone();
        b.params_mut()[4] += 3.0;
        assert!(close(a.param_distance(&b).unwrap(), 3.0, 1e-12));
        let c = FactorModel::zeros(3, 3, 3).unwrap();
        assert!(matches!(a.param_distance(&c), Err(Error::ShapeMismatch(_))));
    }

    fn fd_check(loss: LossKind, seed: u64) {
        let mut rng = rng::seeded(seed);
        let mut m = FactorModel::with_scale(3, 3, 2, 0.7, 0.5, seed).unwrap();
        let other = FactorModel::with_scale(3, 3, 2, 0.7, 0.5, seed + 1000).unwrap();
        let lambda = 0.05;
        let gamma_tc = 0.3;
        // Cover every row so sparse L2 coincides with the full penalty.
        let mut batch = Vec::new();
        for u in 0..3u32 {
            for i in 0..3u32 {
                if (u + i) % 2 == 0 || u == i || rng.random::<bool>() {
                    batch.push((u, i, rng.random_range(-1.0..=1.0), rng.random_range(0.1..2.0)));
                }
            }
        }
        batch.push((0, 1, 1.0, 0.5));
        batch.push((1, 2, 0.0, 0.5));
        batch.push((2, 0, 1.0, 0.5));
        let f = |m: &FactorModel| {
            let mut v = 0.0;
            for &(u, i, y, w) in &batch {
                v += w * loss.eval(y, m.prob_raw(u, i)).unwrap();
            }
            v + m.regularization_value(lambda) + gamma_tc * m.param_distance(&other).unwrap()
        };
        let mut g = m.new_gradient();
        accumulate(&m, &mut g, &batch, &loss).unwrap();
        m.add_l2_grad(&mut g, lambda);
        m.add_distance_grad(&mut g, &other, gamma_tc).unwrap();
        let h = 1e-5;
        for k in 0..m.params().len() {
            let orig = m.params()[k];
            m.params_mut()[k] = orig + h;
            let fp = f(&m);
            m.params_mut()[k] = orig - h;
            let fm = f(&m);
            m.params_mut()[k] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let an = g.values()[k];
            let rel = (fd - an).abs() / (1e-6 + fd.abs().max(an.abs()));
            assert!(rel < 1e-4, "param {k}: fd={fd} an={an}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..100 {
            fd_check(LossKind::bce(), seed);
        }
        for seed in 0..20 {
            fd_check(LossKind::mse(), seed);
        }
    }

    #[test]
    fn sparse_l2_only_touches_batch_rows() {
        let m = FactorModel::with_scale(4, 4, 2, 1.0, 1.0, 9).unwrap();
        let mut g = m.new_gradient();
        m.backprop(&mut g, 1, 2, 0.0);
        m.add_l2_grad(&mut g, 1.0);
        assert_eq!(g.values()[m.user_row(0)], 0.0);
        assert_eq!(g.values()[m.item_row(0)], 0.0);
        assert!(close(g.values()[m.user_row(1)], 2.0 * m.params()[m.user_row(1)], 1e-15));
        g.clear();
        assert!(g.is_zero());
        m.add_l2_grad(&mut g, 1.0);
        assert!(g.is_zero());
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let mut m = FactorModel::with_scale(3, 4, 2, 0.3, 0.0, 11).unwrap();
        let mut opt = OptimizerState::new(&m, 1e-3).unwrap();
        let batch: Vec<Example> = (0..3u32)
            .flat_map(|u| (0..4u32).map(move |i| (u, i, ((u + i) % 2) as f64, 1.0)))
            .collect();
        let loss = LossKind::bce();
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let v = grad_step(&mut m, &mut opt, &batch, &loss, 0.0).unwrap();
            assert!(v <= prev + 1e-8, "{v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn steps_are_deterministic() {
        let run = || {
            let mut m = FactorModel::init(5, 5, 3, 1).unwrap();
            let mut opt = OptimizerState::new(&m, 1e-2).unwrap();
            for s in 0..20u32 {
                let b = [(s % 5, (s * 3) % 5, (s % 2) as f64, 1.0)];
                grad_step(&mut m, &mut opt, &b, &LossKind::bce(), 1e-3).unwrap();
            }
            (m, opt.step_count)
        };
        let (a, n) = run();
        let (b, _) = run();
        assert_eq!(n, 20);
        assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut m = FactorModel::zeros(1, 1, 1).unwrap();
        let mut opt = OptimizerState::new(&m, 1e-3).unwrap();
        let err = grad_step(&mut m, &mut opt, &[(0, 0, f64::NAN, 1.0)], &LossKind::bce(), 0.0);
        assert!(matches!(err, Err(Error::Numerical(_))));
        assert_eq!(opt.step_count, 0);
    }
}
