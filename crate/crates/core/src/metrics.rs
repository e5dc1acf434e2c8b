//! Ranking and classification metrics, candidate sets, and the popularity and
//! cumulative-hit analyses.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Interaction};
use crate::model::FactorModel;
use crate::{Error, Result};

/// Anything that scores `(user, item)` pairs; higher means more relevant.
pub trait Scorer {
    fn score(&self, user: u32, item: u32) -> f64;
}

impl Scorer for FactorModel {
    /// Ranks by logit, which orders pairs exactly like the probability but
    /// without the ties clamping introduces.
    fn score(&self, user: u32, item: u32) -> f64 {
        self.logit_raw(user, item)
    }
}

impl<F: Fn(u32, u32) -> f64> Scorer for F {
    fn score(&self, user: u32, item: u32) -> f64 {
        self(user, item)
    }
}

/// Items each user interacted with in any training set, sorted per user.
#[derive(Debug, Clone)]
pub struct InteractedIndex {
    n_items: u32,
    per_user: Vec<Vec<u32>>,
}

impl InteractedIndex {
    pub fn new(n_users: u32, n_items: u32, train_sets: &[&Dataset]) -> Result<Self> {
        let mut per_user = vec![Vec::new(); n_users as usize];
        for d in train_sets {
            if d.n_users() != n_users || d.n_items() != n_items {
                return Err(Error::ShapeMismatch("training set grid differs".into()));
            }
            for x in d.interactions() {
                per_user[x.user as usize].push(x.item);
            }
        }
        for v in &mut per_user {
            v.sort_unstable();
            v.dedup();
        }
        Ok(Self { n_items, per_user })
    }

    pub fn interacted(&self, user: u32) -> &[u32] {
        &self.per_user[user as usize]
    }

    /// Items the user never interacted with, ascending.
    pub fn candidates(&self, user: u32) -> Vec<u32> {
        let seen = self.interacted(user);
        let mut out = Vec::with_capacity(self.n_items as usize - seen.len());
        let mut s = 0;
        for i in 0..self.n_items {
            if s < seen.len() && seen[s] == i {
                s += 1;
            } else {
                out.push(i);
            }
        }
        out
    }
}

/// All items minus those `user` interacted with in any of `train_sets`, ascending.
pub fn candidates(user: u32, train_sets: &[&Dataset], n_items: u32) -> Vec<u32> {
    let mut seen: Vec<u32> = train_sets
        .iter()
        .flat_map(|d| d.interactions().iter())
        .filter(|x| x.user == user)
        .map(|x| x.item)
        .collect();
    seen.sort_unstable();
    (0..n_items).filter(|i| seen.binary_search(i).is_err()).collect()
}

/// Probability that a random positive outscores a random negative; ties count 1/2.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "AUC needs both positive and negative labels".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of midranks (1-based) of positives.
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut j = k;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[k]] {
            j += 1;
        }
        let mid = (k + j) as f64 / 2.0 + 1.0;
        for &idx in &order[k..=j] {
            if labels[idx] == 1 {
                rank_sum += mid;
            }
        }
        k = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Global AUC of `scorer` over a labelled set.
pub fn auc_of<S: Scorer + ?Sized>(scorer: &S, data: &[Interaction]) -> Result<f64> {
    let scores: Vec<f64> = data.iter().map(|x| scorer.score(x.user, x.item)).collect();
    let labels: Vec<u8> = data.iter().map(|x| x.label).collect();
    auc(&scores, &labels)
}

/// AUC computed per user and averaged over users that have both labels.
pub fn auc_per_user<S: Scorer + ?Sized>(scorer: &S, data: &Dataset) -> Result<f64> {
    let mut by_user: Vec<Vec<&Interaction>> = vec![Vec::new(); data.n_users() as usize];
    for x in data.interactions() {
        by_user[x.user as usize].push(x);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for xs in by_user {
        let pos = xs.iter().filter(|x| x.is_positive()).count();
        if pos == 0 || pos == xs.len() {
            continue;
        }
        let scores: Vec<f64> = xs.iter().map(|x| scorer.score(x.user, x.item)).collect();
        let labels: Vec<u8> = xs.iter().map(|x| x.label).collect();
        sum += auc(&scores, &labels)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no user has both labels".into()));
    }
    Ok(sum / n as f64)
}

#[inline]
fn discount(rank: usize) -> f64 {
    1.0 / libm::log2(rank as f64 + 1.0)
}

/// Per-user ranking metrics from a relevance list in ranked order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRankMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub ndcg: f64,
}

/// `relevant[r]` tells whether the item at 0-based rank `r` is a positive.
/// `n_pos` is the number of positives in the whole list and must be > 0.
pub fn rank_metrics(relevant: &[bool], n_pos: usize, ks: &[usize], ndcg_cutoff: Option<usize>) -> UserRankMetrics {
    debug_assert!(n_pos > 0);
    let mut precision = Vec::with_capacity(ks.len());
    let mut recall = Vec::with_capacity(ks.len());
    for &k in ks {
        let hits = relevant.iter().take(k).filter(|&&r| r).count() as f64;
        precision.push(hits / k as f64);
        recall.push(hits / n_pos as f64);
    }
    let cut = ndcg_cutoff.unwrap_or(relevant.len()).min(relevant.len());
    let dcg: f64 = relevant[..cut]
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(r, _)| discount(r + 1))
        .sum();
    let ideal: f64 = (1..=n_pos.min(cut)).map(discount).sum();
    let ndcg = if ideal > 0.0 { dcg / ideal } else { 0.0 };
    UserRankMetrics {
        precision,
        recall,
        ndcg,
    }
}

/// Candidates sorted by descending score, ties by ascending item id.
pub fn rank_items<S: Scorer + ?Sized>(scorer: &S, user: u32, candidates: &[u32]) -> Vec<u32> {
    let mut scored: Vec<(f64, u32)> = candidates.iter().map(|&i| (scorer.score(user, i), i)).collect();
    scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| i).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub auc: f64,
    pub ndcg: f64,
    /// `(K, P@K)`.
    pub precision_at: Vec<(usize, f64)>,
    /// `(K, R@K)`.
    pub recall_at: Vec<(usize, f64)>,
    pub n_users_evaluated: usize,
}

impl MetricsReport {
    pub fn precision(&self, k: usize) -> Option<f64> {
        self.precision_at.iter().find(|(kk, _)| *kk == k).map(|p| p.1)
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        self.recall_at.iter().find(|(kk, _)| *kk == k).map(|p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub ndcg_cutoff: Option<usize>,
    pub per_user_auc: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ks: vec![5, 10],
            ndcg_cutoff: None,
            per_user_auc: false,
        }
    }
}

/// Positives of each user in `test`, sorted.
fn positives_by_user(test: &Dataset) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); test.n_users() as usize];
    for x in test.interactions().iter().filter(|x| x.is_positive()) {
        out[x.user as usize].push(x.item);
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

/// Top-K ranking metrics averaged over users with at least one test positive
/// among their candidates.
pub fn topk_metrics<S: Scorer + ?Sized>(
    scorer: &S,
    test: &Dataset,
    index: &InteractedIndex,
    ks: &[usize],
    ndcg_cutoff: Option<usize>,
) -> (Vec<f64>, Vec<f64>, f64, usize) {
    let positives = positives_by_user(test);
    let mut p = vec![0.0; ks.len()];
    let mut r = vec![0.0; ks.len()];
    let mut ndcg = 0.0;
    let mut n = 0usize;
    for (u, pos) in positives.iter().enumerate() {
        if pos.is_empty() {
            continue;
        }
        let u = u as u32;
        let cands = index.candidates(u);
        let n_pos = cands.iter().filter(|i| pos.binary_search(i).is_ok()).count();
        if n_pos == 0 {
            continue;
        }
        let ranked = rank_items(scorer, u, &cands);
        let rel: Vec<bool> = ranked.iter().map(|i| pos.binary_search(i).is_ok()).collect();
        let m = rank_metrics(&rel, n_pos, ks, ndcg_cutoff);
        for k in 0..ks.len() {
            p[k] += m.precision[k];
            r[k] += m.recall[k];
        }
        ndcg += m.ndcg;
        n += 1;
    }
    if n > 0 {
        let nf = n as f64;
        p.iter_mut().for_each(|v| *v /= nf);
        r.iter_mut().for_each(|v| *v /= nf);
        ndcg /= nf;
    }
    (p, r, ndcg, n)
}

/// AUC over all test interactions plus top-K metrics over candidate rankings.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    test: &Dataset,
    train_sets: &[&Dataset],
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    let index = InteractedIndex::new(test.n_users(), test.n_items(), train_sets)?;
    let auc = if opts.per_user_auc {
        auc_per_user(scorer, test)?
    } else {
        auc_of(scorer, test.interactions())?
    };
    let (p, r, ndcg, n) = topk_metrics(scorer, test, &index, &opts.ks, opts.ndcg_cutoff);
    Ok(MetricsReport {
        auc,
        ndcg,
        precision_at: opts.ks.iter().copied().zip(p).collect(),
        recall_at: opts.ks.iter().copied().zip(r).collect(),
        n_users_evaluated: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopularityReport {
    /// Items in the top 20% by frequency in `S_c`, ascending.
    pub popular_items: Vec<u32>,
    /// `[popular, unpopular]` share of recommendation slots.
    pub rec_share: [f64; 2],
    /// `[popular, unpopular]` share of hits.
    pub hit_share: [f64; 2],
    /// `hit_share / rec_share` per group; 0 where either is 0.
    pub utility: [f64; 2],
    pub total_slots: usize,
    pub total_hits: usize,
}

/// The `ceil(0.2 * n_items)` most frequent items of `s_c`, ties by ascending id.
pub fn popular_items(s_c: &Dataset) -> Vec<u32> {
    let n = s_c.n_items() as usize;
    let mut freq = vec![0usize; n];
    for x in s_c.interactions() {
        freq[x.item as usize] += 1;
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| freq[b as usize].cmp(&freq[a as usize]).then(a.cmp(&b)));
    let top = libm::ceil(n as f64 * 0.2) as usize;
    let mut out = order[..top].to_vec();
    out.sort_unstable();
    out
}

/// Share of top-`list_len` recommendation slots and of hits that fall on
/// popular versus unpopular items, over users that appear in `test`.
pub fn popularity_report<S: Scorer + ?Sized>(
    scorer: &S,
    s_c: &Dataset,
    test: &Dataset,
    train_sets: &[&Dataset],
    list_len: usize,
) -> Result<PopularityReport> {
    if list_len == 0 {
        return Err(Error::InvalidArgument("list length must be positive".into()));
    }
    let popular = popular_items(s_c);
    let mut is_pop = vec![false; s_c.n_items() as usize];
    for &i in &popular {
        is_pop[i as usize] = true;
    }
    let index = InteractedIndex::new(test.n_users(), test.n_items(), train_sets)?;
    let positives = positives_by_user(test);
    let mut in_test = vec![false; test.n_users() as usize];
    for x in test.interactions() {
        in_test[x.user as usize] = true;
    }
    let mut slots = [0usize; 2];
    let mut hits = [0usize; 2];
    for u in (0..test.n_users()).filter(|&u| in_test[u as usize]) {
        let ranked = rank_items(scorer, u, &index.candidates(u));
        for &i in ranked.iter().take(list_len) {
            let g = if is_pop[i as usize] { 0 } else { 1 };
            slots[g] += 1;
            if positives[u as usize].binary_search(&i).is_ok() {
                hits[g] += 1;
            }
        }
    }
    let share = |x: [usize; 2]| {
        let t = x[0] + x[1];
        if t == 0 {
            [0.0, 0.0]
        } else {
            [x[0] as f64 / t as f64, x[1] as f64 / t as f64]
        }
    };
    let rec_share = share(slots);
    let hit_share = share(hits);
    let mut utility = [0.0; 2];
    for g in 0..2 {
        if rec_share[g] > 0.0 {
            utility[g] = hit_share[g] / rec_share[g];
        }
    }
    Ok(PopularityReport {
        popular_items: popular,
        rec_share,
        hit_share,
        utility,
        total_slots: slots[0] + slots[1],
        total_hits: hits[0] + hits[1],
    })
}

/// Running sum over users in ascending index of each user's share of all test
/// positives recovered in their top-`k` list.
pub fn cumulative_hits<S: Scorer + ?Sized>(
    scorer: &S,
    test: &Dataset,
    train_sets: &[&Dataset],
    k: usize,
) -> Result<Vec<f64>> {
    let index = InteractedIndex::new(test.n_users(), test.n_items(), train_sets)?;
    let positives = positives_by_user(test);
    let total = test.positives();
    let mut curve = Vec::with_capacity(test.n_users() as usize);
    let mut acc = 0usize;
    for u in 0..test.n_users() {
        let pos = &positives[u as usize];
        if !pos.is_empty() {
            let ranked = rank_items(scorer, u, &index.candidates(u));
            acc += ranked.iter().take(k).filter(|i| pos.binary_search(i).is_ok()).count();
        }
        curve.push(if total == 0 { 0.0 } else { acc as f64 / total as f64 });
    }
    Ok(curve)
}
