//! A synthetic feedback world with complete ground truth under both policies.
//!
//! The generator draws a low-rank true-preference matrix and realizes two
//! complete binary feedback matrices from it with common random numbers:
//!
//! * `r_t`, feedback under uniform exposure: `Bernoulli(p_ij)`;
//! * `r_c`, feedback under the deployed policy: the preference logit shifted by
//!   `label_shift * ln(boost) * z_j`, where `z_j` in `[-1, 1]` is the item's centred
//!   popularity rank. Popular items collect pseudo-positives and unpopular
//!   items pseudo-negatives; with `boost = 1` the two matrices coincide.
//!
//! The stochastic policy exposes pair `(i, j)` with probability proportional to
//! `pop_j^alpha * boost^(s_ij)`, where `pop_j = 1 / (1 + rank_j)` is a Zipf
//! weight over a random item order (independent of preference) and `s_ij` in
//! `[0, 1]` is the min-max normalized preference of item `j` within user `i`'s
//! row. Each row is scaled (and capped at 1 per pair) so that it sums to
//! `impressions_c / n_users`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Interaction, Regime};
use crate::rng;
use crate::{Error, Result};

/// Largest dense world the generator accepts.
pub const MAX_DENSE_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldSpec {
    pub n_users: u32,
    pub n_items: u32,
    /// Latent dimension of the generating preference model.
    pub rank_true: usize,
    /// Exponent on item popularity in the stochastic exposure (`alpha >= 0`).
    pub popularity_skew: f64,
    /// Multiplier `>= 1` by which the stochastic policy over-exposes items the
    /// generating model scores highly; also the odds shift of `r_c` vs `r_t`.
    pub positivity_boost: f64,
    /// Expected logged impressions under the stochastic policy.
    pub impressions_c: usize,
    /// Expected logged impressions under the uniform policy.
    pub impressions_t: usize,
    pub seed: u64,
    /// Standard deviation of the generating user/item factors.
    pub factor_scale: f64,
    /// Standard deviation of the generating item offsets.
    pub item_bias_scale: f64,
    /// Constant added to every preference logit; sets the base positive rate.
    pub preference_offset: f64,
    /// Strength of the `r_c` label coupling, in units of `ln(boost)` logits at
    /// the extremes of the popularity order.
    pub label_shift: f64,
}

impl WorldSpec {
    /// Spec with the generator's default shape parameters.
    pub fn new(n_users: u32, n_items: u32, seed: u64) -> Self {
        let d = n_users as usize * n_items as usize;
        Self {
            n_users,
            n_items,
            rank_true: 4,
            popularity_skew: 1.0,
            positivity_boost: 2.0,
            impressions_c: d / 5,
            impressions_t: d / 20,
            seed,
            factor_scale: 0.9,
            item_bias_scale: 1.0,
            preference_offset: -2.5,
            label_shift: 1.0,
        }
    }

    pub fn d_size(&self) -> usize {
        self.n_users as usize * self.n_items as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidArgument(msg));
        if self.n_users == 0 || self.n_items == 0 || self.rank_true == 0 {
            return bad(format!(
                "world dimensions must be positive ({}x{}, rank {})",
                self.n_users, self.n_items, self.rank_true
            ));
        }
        if self.d_size() > MAX_DENSE_CELLS {
            return bad(format!(
                "dense world limited to {MAX_DENSE_CELLS} cells, got {}",
                self.d_size()
            ));
        }
        if !(self.popularity_skew >= 0.0 && self.popularity_skew.is_finite()) {
            return bad(format!("popularity_skew must be >= 0, got {}", self.popularity_skew));
        }
        if !(self.positivity_boost >= 1.0 && self.positivity_boost.is_finite()) {
            return bad(format!(
                "positivity_boost must be >= 1, got {}",
                self.positivity_boost
            ));
        }
        if self.impressions_c == 0 || self.impressions_t == 0 {
            return bad("impression counts must be positive".into());
        }
        if self.impressions_t > self.impressions_c {
            return bad(format!(
                "impressions_t ({}) must not exceed impressions_c ({})",
                self.impressions_t, self.impressions_c
            ));
        }
        if self.impressions_c > self.d_size() {
            return bad(format!(
                "impressions_c ({}) exceeds |D| ({})",
                self.impressions_c,
                self.d_size()
            ));
        }
        if !(self.factor_scale >= 0.0 && self.item_bias_scale >= 0.0 && self.label_shift >= 0.0) {
            return bad("factor scales must be non-negative".into());
        }
        Ok(())
    }
}

/// Complete feedback matrices and exposure of one synthetic world (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    spec: WorldSpec,
    r_c: Vec<u8>,
    r_t: Vec<u8>,
    exposure_c: Vec<f64>,
    exposure_t: f64,
    preference: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// The deployed policy: exposure follows `exposure_c`, labels come from `r_c`.
    Stochastic,
    /// Uniform exposure, labels from `r_t`.
    Uniform,
}

impl SyntheticWorld {
    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn n_users(&self) -> u32 {
        self.spec.n_users
    }

    pub fn n_items(&self) -> u32 {
        self.spec.n_items
    }

    pub fn d_size(&self) -> usize {
        self.spec.d_size()
    }

    fn cell(&self, user: u32, item: u32) -> usize {
        user as usize * self.spec.n_items as usize + item as usize
    }

    pub fn r_c(&self, user: u32, item: u32) -> u8 {
        self.r_c[self.cell(user, item)]
    }

    pub fn r_t(&self, user: u32, item: u32) -> u8 {
        self.r_t[self.cell(user, item)]
    }

    pub fn preference(&self, user: u32, item: u32) -> f64 {
        self.preference[self.cell(user, item)]
    }

    pub fn exposure_c(&self, user: u32, item: u32) -> f64 {
        self.exposure_c[self.cell(user, item)]
    }

    pub fn exposure_t(&self) -> f64 {
        self.exposure_t
    }

    /// Row-major `r_c`.
    pub fn r_c_matrix(&self) -> &[u8] {
        &self.r_c
    }

    /// Row-major `r_t`.
    pub fn r_t_matrix(&self) -> &[u8] {
        &self.r_t
    }

    pub fn exposure_c_matrix(&self) -> &[f64] {
        &self.exposure_c
    }

    pub fn preference_matrix(&self) -> &[f64] {
        &self.preference
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Scales `weights` so they sum to `budget` with every entry capped at 1.
fn cap_and_scale(weights: &mut [f64], budget: f64) {
    let n = weights.len();
    let mut capped = vec![false; n];
    let mut n_capped = 0usize;
    loop {
        let free: f64 = weights
            .iter()
            .zip(&capped)
            .filter(|(_, c)| !**c)
            .map(|(w, _)| *w)
            .sum();
        let remaining = budget - n_capped as f64;
        if free <= 0.0 || remaining <= 0.0 {
            break;
        }
        let scale = remaining / free;
        let mut newly = 0;
        for (w, c) in weights.iter().zip(capped.iter_mut()) {
            if !*c && *w * scale >= 1.0 {
                *c = true;
                newly += 1;
            }
        }
        n_capped += newly;
        if newly == 0 {
            for (w, c) in weights.iter_mut().zip(&capped) {
                if !*c {
                    *w *= scale;
                }
            }
            break;
        }
    }
    for (w, c) in weights.iter_mut().zip(&capped) {
        if *c {
            *w = 1.0;
        }
    }
}

pub fn generate_world(spec: &WorldSpec) -> Result<SyntheticWorld> {
    spec.validate()?;
    let (n_u, n_i, k) = (
        spec.n_users as usize,
        spec.n_items as usize,
        spec.rank_true,
    );
    let mut rng = rng::seeded(spec.seed);
    let factor = Normal::new(0.0, spec.factor_scale)
        .map_err(|e| Error::InvalidArgument(format!("factor_scale: {e}")))?;
    let offset = Normal::new(0.0, spec.item_bias_scale)
        .map_err(|e| Error::InvalidArgument(format!("item_bias_scale: {e}")))?;

    let users: Vec<f64> = (0..n_u * k).map(|_| factor.sample(&mut rng)).collect();
    let items: Vec<f64> = (0..n_i * k).map(|_| factor.sample(&mut rng)).collect();
    let item_offset: Vec<f64> = (0..n_i).map(|_| offset.sample(&mut rng)).collect();

    let mut logits = vec![0.0; n_u * n_i];
    for u in 0..n_u {
        let pu = &users[u * k..(u + 1) * k];
        for i in 0..n_i {
            let qi = &items[i * k..(i + 1) * k];
            let dot: f64 = pu.iter().zip(qi).map(|(a, b)| a * b).sum();
            logits[u * n_i + i] = dot + item_offset[i] + spec.preference_offset;
        }
    }
    let preference: Vec<f64> = logits.iter().map(|&x| sigmoid(x)).collect();
    let draws: Vec<f64> = (0..n_u * n_i).map(|_| rng.random::<f64>()).collect();
    let r_t: Vec<u8> = draws
        .iter()
        .zip(&preference)
        .map(|(u, p)| u8::from(*u < *p))
        .collect();

    // Promotion popularity: Zipf weights over a random item order, independent
    // of the generating preferences.
    let mut perm: Vec<usize> = (0..n_i).collect();
    perm.shuffle(&mut rng);
    let mut popularity = vec![0.0f64; n_i];
    for (rank, &item) in perm.iter().enumerate() {
        popularity[item] = 1.0 / (1.0 + rank as f64);
    }
    // Centred popularity rank in [-1, 1]; the most popular item maps to 1.
    let mut centred = vec![0.0; n_i];
    if n_i > 1 {
        for (rank, &item) in perm.iter().enumerate() {
            centred[item] = 1.0 - 2.0 * rank as f64 / (n_i - 1) as f64;
        }
    }

    let shift = spec.label_shift * libm::log(spec.positivity_boost);
    let r_c: Vec<u8> = (0..n_u * n_i)
        .map(|cell| {
            let p_c = sigmoid(logits[cell] + shift * centred[cell % n_i]);
            u8::from(draws[cell] < p_c)
        })
        .collect();

    let budget = spec.impressions_c as f64 / n_u as f64;
    let mut exposure_c = vec![0.0; n_u * n_i];
    for u in 0..n_u {
        let row = &preference[u * n_i..(u + 1) * n_i];
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                (lo.min(p), hi.max(p))
            });
        let span = hi - lo;
        let out = &mut exposure_c[u * n_i..(u + 1) * n_i];
        for i in 0..n_i {
            let score = if span > 0.0 { (row[i] - lo) / span } else { 0.0 };
            out[i] = libm::pow(popularity[i], spec.popularity_skew)
                * libm::pow(spec.positivity_boost, score);
        }
        cap_and_scale(out, budget);
    }

    Ok(SyntheticWorld {
        spec: spec.clone(),
        r_c,
        r_t,
        exposure_c,
        exposure_t: spec.impressions_t as f64 / spec.d_size() as f64,
        preference,
    })
}

/// Logs `n_impressions` distinct pairs under `policy`.
///
/// Stochastic logging is weighted sampling without replacement with weights
/// `exposure_c` (Efraimidis-Spirakis keys `ln(u) / w`); uniform logging draws a
/// uniform subset of the grid. Output order is the draw order.
pub fn log_feedback(
    world: &SyntheticWorld,
    policy: Policy,
    n_impressions: usize,
    seed: u64,
) -> Result<Dataset> {
    let d = world.d_size();
    if n_impressions > d {
        return Err(Error::Insufficient {
            what: "grid pairs to log",
            needed: n_impressions,
            available: d,
        });
    }
    let n_i = world.spec.n_items as usize;
    let mut rng = rng::seeded(seed);
    let cells: Vec<usize> = match policy {
        Policy::Uniform => index::sample(&mut rng, d, n_impressions).into_vec(),
        Policy::Stochastic => {
            let mut keyed: Vec<(f64, usize)> = world
                .exposure_c
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(cell, &w)| {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    (libm::log(u) / w, cell)
                })
                .collect();
            if keyed.len() < n_impressions {
                return Err(Error::Insufficient {
                    what: "exposable pairs",
                    needed: n_impressions,
                    available: keyed.len(),
                });
            }
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            keyed.truncate(n_impressions);
            keyed.into_iter().map(|(_, cell)| cell).collect()
        }
    };
    let (labels, regime) = match policy {
        Policy::Stochastic => (&world.r_c, Regime::NonRandomized),
        Policy::Uniform => (&world.r_t, Regime::Randomized),
    };
    let interactions = cells
        .into_iter()
        .map(|cell| Interaction::new((cell / n_i) as u32, (cell % n_i) as u32, labels[cell]))
        .collect();
    Ok(Dataset::from_trusted(
        interactions,
        world.spec.n_users,
        world.spec.n_items,
        regime,
    ))
}

/// Reassembles a world from its parts, checking shapes and value ranges.
pub fn world_from_parts(
    spec: WorldSpec,
    r_c: Vec<u8>,
    r_t: Vec<u8>,
    exposure_c: Vec<f64>,
    preference: Vec<f64>,
) -> Result<SyntheticWorld> {
    spec.validate()?;
    let d = spec.d_size();
    for (name, len) in [
        ("r_c", r_c.len()),
        ("r_t", r_t.len()),
        ("exposure_c", exposure_c.len()),
        ("preference", preference.len()),
    ] {
        if len != d {
            return Err(Error::ShapeMismatch(format!("{name} has {len} cells, expected {d}")));
        }
    }
    if r_c.iter().chain(&r_t).any(|&x| x > 1) {
        return Err(Error::DataIntegrity("feedback matrices must be 0/1".into()));
    }
    if exposure_c
        .iter()
        .chain(&preference)
        .any(|x| !(0.0..=1.0).contains(x))
    {
        return Err(Error::DataIntegrity("probabilities must lie in [0, 1]".into()));
    }
    Ok(SyntheticWorld {
        exposure_t: spec.impressions_t as f64 / d as f64,
        spec,
        r_c,
        r_t,
        exposure_c,
        preference,
    })
}
