//! Logged feedback, datasets and the splitters used by the experimental protocol.
//!
//! The complete index space `D` is the full `n_users x n_items` grid. The set of
//! unobserved pairs is never materialized: it is addressed as the complement of
//! the sorted pair keys of the observed datasets.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};

use crate::rng;
use crate::{Error, Result};

/// One logged `(user, item, label)` triple. Labels are `0` or `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub label: u8,
}

impl Interaction {
    pub const fn new(user: u32, item: u32, label: u8) -> Self {
        Self { user, item, label }
    }

    pub fn target(&self) -> f64 {
        f64::from(self.label)
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// Which logging regime (or protocol role) a dataset comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    /// Logged under the deployed stochastic policy.
    NonRandomized,
    /// Logged under uniform exposure.
    Randomized,
    Validation,
    Test,
    /// Pairs drawn from the unobserved set; labels carry no meaning.
    Auxiliary,
}

/// Immutable collection of interactions over a fixed `n_users x n_items` grid.
///
/// Construction validates that indices are in range, labels are binary and
/// no `(user, item)` pair appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    interactions: Vec<Interaction>,
    n_users: u32,
    n_items: u32,
    regime: Regime,
}

impl Dataset {
    pub fn new(
        interactions: Vec<Interaction>,
        n_users: u32,
        n_items: u32,
        regime: Regime,
    ) -> Result<Self> {
        if n_users == 0 || n_items == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must be non-empty, got {n_users}x{n_items}"
            )));
        }
        for (row, x) in interactions.iter().enumerate() {
            if x.user >= n_users || x.item >= n_items {
                return Err(Error::DataIntegrity(format!(
                    "interaction {row} ({}, {}) outside {n_users}x{n_items}",
                    x.user, x.item
                )));
            }
            if x.label > 1 && regime != Regime::Auxiliary {
                return Err(Error::DataIntegrity(format!(
                    "interaction {row} has non-binary label {}",
                    x.label
                )));
            }
        }
        let ds = Self {
            interactions,
            n_users,
            n_items,
            regime,
        };
        let keys = ds.sorted_keys();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            let (u, i) = ds.pair_of(w[0]);
            return Err(Error::DataIntegrity(format!(
                "duplicate pair ({u}, {i}) in {:?} dataset",
                regime
            )));
        }
        Ok(ds)
    }

    pub fn empty(n_users: u32, n_items: u32, regime: Regime) -> Self {
        Self {
            interactions: Vec::new(),
            n_users,
            n_items,
            regime,
        }
    }

    /// Builds a dataset from interactions already known to satisfy the invariants.
    pub(crate) fn from_trusted(
        interactions: Vec<Interaction>,
        n_users: u32,
        n_items: u32,
        regime: Regime,
    ) -> Self {
        debug_assert!(Self::new(interactions.clone(), n_users, n_items, regime).is_ok());
        Self {
            interactions,
            n_users,
            n_items,
            regime,
        }
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn into_interactions(self) -> Vec<Interaction> {
        self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> u32 {
        self.n_users
    }

    pub fn n_items(&self) -> u32 {
        self.n_items
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `|D| = n_users * n_items`.
    pub fn d_size(&self) -> usize {
        self.n_users as usize * self.n_items as usize
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    pub fn positives(&self) -> usize {
        self.interactions.iter().filter(|x| x.is_positive()).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Fraction of positive labels; `0` for an empty dataset.
    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.len() as f64
        }
    }

    /// Positive-to-negative ratio (the "P/N" statistic of dataset summaries).
    pub fn pn_ratio(&self) -> f64 {
        self.positives() as f64 / self.negatives() as f64
    }

    pub fn key(&self, user: u32, item: u32) -> u64 {
        u64::from(user) * u64::from(self.n_items) + u64::from(item)
    }

    pub fn pair_of(&self, key: u64) -> (u32, u32) {
        (
            (key / u64::from(self.n_items)) as u32,
            (key % u64::from(self.n_items)) as u32,
        )
    }

    /// Sorted pair keys `user * n_items + item`.
    pub fn sorted_keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self
            .interactions
            .iter()
            .map(|x| self.key(x.user, x.item))
            .collect();
        keys.sort_unstable();
        keys
    }

    pub fn same_grid(&self, other: &Dataset) -> bool {
        self.n_users == other.n_users && self.n_items == other.n_items
    }

    fn check_grid(&self, other: &Dataset) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n_users, self.n_items, other.n_users, other.n_items
            )))
        }
    }

    /// Concatenation of two datasets over the same grid; fails on shared pairs.
    pub fn union(&self, other: &Dataset, regime: Regime) -> Result<Dataset> {
        self.check_grid(other)?;
        let mut all = self.interactions.clone();
        all.extend_from_slice(&other.interactions);
        Dataset::new(all, self.n_users, self.n_items, regime)
    }

    fn subset(&self, interactions: Vec<Interaction>, regime: Regime) -> Dataset {
        Dataset::from_trusted(interactions, self.n_users, self.n_items, regime)
    }
}

/// Sorted, deduplicated set of pair keys, used for membership and complement sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    keys: Vec<u64>,
    n_items: u32,
}

impl PairSet {
    pub fn from_datasets(sets: &[&Dataset]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InvalidArgument("no datasets given".into()))?;
        let mut keys = Vec::new();
        for d in sets {
            first.check_grid(d)?;
            keys.extend(d.interactions.iter().map(|x| first.key(x.user, x.item)));
        }
        keys.sort_unstable();
        keys.dedup();
        Ok(Self {
            keys,
            n_items: first.n_items,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, user: u32, item: u32) -> bool {
        let key = u64::from(user) * u64::from(self.n_items) + u64::from(item);
        self.keys.binary_search(&key).is_ok()
    }

    /// Maps the `rank`-th key of the complement (in ascending order) to its key.
    ///
    /// Before the `j`-th excluded key `e_j` there are `e_j - j` complement keys,
    /// a non-decreasing sequence, so the number of excluded keys preceding the
    /// answer is found by binary search.
    pub(crate) fn complement_key(&self, rank: u64) -> u64 {
        let (mut lo, mut hi) = (0usize, self.keys.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.keys[mid] - mid as u64 <= rank {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        rank + lo as u64
    }
}

fn sizes_for(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidArgument(format!(
            "split ratios must lie in [0, 1], got ({a}, {b}, {c})"
        )));
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must sum to 1, got {}",
            a + b + c
        )));
    }
    let first = libm::round(n as f64 * a) as usize;
    let second = (libm::round(n as f64 * b) as usize).min(n - first.min(n));
    let first = first.min(n);
    Ok((first, second, n - first - second))
}

fn split_three(
    d: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
    regimes: [Regime; 3],
) -> Result<(Dataset, Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
    }
    let (n_a, n_b, _) = sizes_for(d.len(), ratios)?;
    let mut shuffled = d.interactions.clone();
    shuffled.shuffle(&mut rng::seeded(seed));
    let rest = shuffled.split_off(n_a);
    let mut rest = rest;
    let third = rest.split_off(n_b);
    Ok((
        d.subset(shuffled, regimes[0]),
        d.subset(rest, regimes[1]),
        d.subset(third, regimes[2]),
    ))
}

/// Shuffles a randomized log and cuts it into train / validation / test parts.
pub fn split_randomized(
    d: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if d.regime != Regime::Randomized {
        return Err(Error::InvalidArgument(format!(
            "split_randomized expects a Randomized dataset, got {:?}",
            d.regime
        )));
    }
    split_three(
        d,
        ratios,
        seed,
        [Regime::Randomized, Regime::Validation, Regime::Test],
    )
}

/// The 5:2:3 split of the non-randomized log used by the biased ("general") evaluation.
pub fn split_general(d: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    split_three(
        d,
        (0.5, 0.2, 0.3),
        seed,
        [Regime::NonRandomized, Regime::Validation, Regime::Test],
    )
}

/// Drops every interaction of `s_c` whose pair also appears in `s_t`, keeping order.
pub fn remove_overlap(s_c: &Dataset, s_t: &Dataset) -> Result<Dataset> {
    s_c.check_grid(s_t)?;
    let taken = s_t.sorted_keys();
    let kept = s_c
        .interactions
        .iter()
        .filter(|x| taken.binary_search(&s_c.key(x.user, x.item)).is_err())
        .copied()
        .collect();
    Ok(s_c.subset(kept, s_c.regime))
}

/// Draws `total` interactions with exactly `round(total * ratio)` positives.
pub fn subsample_positive_ratio(
    s_c: &Dataset,
    ratio: f64,
    total: usize,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "positive ratio must lie in [0, 1], got {ratio}"
        )));
    }
    let n_pos = libm::round(total as f64 * ratio) as usize;
    let n_neg = total - n_pos;
    let (pos, neg): (Vec<Interaction>, Vec<Interaction>) =
        s_c.interactions.iter().partition(|x| x.is_positive());
    if pos.len() < n_pos {
        return Err(Error::Insufficient {
            what: "positives",
            needed: n_pos,
            available: pos.len(),
        });
    }
    if neg.len() < n_neg {
        return Err(Error::Insufficient {
            what: "negatives",
            needed: n_neg,
            available: neg.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut out: Vec<Interaction> = index::sample(&mut rng, pos.len(), n_pos)
        .into_iter()
        .map(|i| pos[i])
        .collect();
    out.extend(
        index::sample(&mut rng, neg.len(), n_neg)
            .into_iter()
            .map(|i| neg[i]),
    );
    out.shuffle(&mut rng);
    Ok(s_c.subset(out, s_c.regime))
}

/// Uniform sample without replacement of `round(fraction * |d|)` interactions.
pub fn subsample_fraction(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = libm::round(d.len() as f64 * fraction) as usize;
    let mut shuffled = d.interactions.clone();
    shuffled.shuffle(&mut rng::seeded(seed));
    shuffled.truncate(n);
    Ok(d.subset(shuffled, d.regime))
}

/// Draws `n` pairs uniformly without replacement from the pairs present in
/// neither `s_c` nor `s_t`. The result is tagged [`Regime::Auxiliary`] and its
/// labels are zero placeholders.
pub fn sample_unobserved(s_c: &Dataset, s_t: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    let observed = PairSet::from_datasets(&[s_c, s_t])?;
    sample_complement(&observed, s_c.n_users, s_c.n_items, n, seed)
}

/// [`sample_unobserved`] against a prebuilt exclusion set.
pub fn sample_complement(
    excluded: &PairSet,
    n_users: u32,
    n_items: u32,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let d_size = n_users as usize * n_items as usize;
    let available = d_size - excluded.len();
    if n > available {
        return Err(Error::Insufficient {
            what: "unobserved pairs",
            needed: n,
            available,
        });
    }
    let mut rng = rng::seeded(seed);
    let out = index::sample(&mut rng, available, n)
        .into_iter()
        .map(|rank| {
            let key = excluded.complement_key(rank as u64);
            Interaction::new(
                (key / u64::from(n_items)) as u32,
                (key % u64::from(n_items)) as u32,
                0,
            )
        })
        .collect();
    Ok(Dataset::from_trusted(out, n_users, n_items, Regime::Auxiliary))
}
