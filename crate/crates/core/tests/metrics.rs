//! AUC and ranking metrics against brute-force references on small inputs.

use dubrec_core::data::{Dataset, Interaction, Regime};
use dubrec_core::metrics::{auc, rank_items, rank_metrics, topk_metrics, InteractedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 10_000;
const TOL: f64 = 1e-12;

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (sp, _) in scores.iter().zip(labels).filter(|(_, &l)| l == 1) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, &l)| l == 0) {
            den += 1.0;
            if sp > sn {
                num += 1.0;
            } else if sp == sn {
                num += 0.5;
            }
        }
    }
    num / den
}

fn dcg(rel: &[bool]) -> f64 {
    rel.iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(k, _)| 1.0 / ((k + 2) as f64).log2())
        .sum()
}

/// Best DCG over every ordering of `rel`.
fn ideal_by_permutation(rel: &mut Vec<bool>, k: usize, best: &mut f64) {
    if k == rel.len() {
        *best = best.max(dcg(rel));
        return;
    }
    for j in k..rel.len() {
        rel.swap(k, j);
        ideal_by_permutation(rel, k + 1, best);
        rel.swap(k, j);
    }
}

#[test]
fn auc_matches_pairwise_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut done = 0;
    while done < CASES {
        let n = rng.random_range(2..=8);
        // Few distinct values so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..4u8)) * 0.25).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            assert!(auc(&scores, &labels).is_err());
            continue;
        }
        let got = auc(&scores, &labels).unwrap();
        assert!((got - pairwise_auc(&scores, &labels)).abs() <= TOL, "{scores:?} {labels:?}");
        done += 1;
    }
}

#[test]
fn ndcg_precision_recall_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut done = 0;
    while done < CASES {
        let n = rng.random_range(1..=8u32);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..5u8))).collect();
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let n_pos = positive.iter().filter(|&&p| p).count();
        if n_pos == 0 {
            continue;
        }
        let candidates: Vec<u32> = (0..n).collect();
        let scorer = |_u: u32, i: u32| scores[i as usize];
        let ranked = rank_items(&scorer, 0, &candidates);

        // Reference order: selection of the highest score, lowest id first.
        let mut left = candidates.clone();
        let mut expected = Vec::new();
        while !left.is_empty() {
            let mut best = 0;
            for k in 1..left.len() {
                let (a, b) = (left[k], left[best]);
                if scores[a as usize] > scores[b as usize] || (scores[a as usize] == scores[b as usize] && a < b) {
                    best = k;
                }
            }
            expected.push(left.remove(best));
        }
        assert_eq!(ranked, expected);

        let rel: Vec<bool> = ranked.iter().map(|&i| positive[i as usize]).collect();
        let ks = [1, 3, 5];
        let m = rank_metrics(&rel, n_pos, &ks, None);
        let mut ideal = 0.0;
        if n <= 6 {
            ideal_by_permutation(&mut rel.clone(), 0, &mut ideal);
        } else {
            let mut sorted = rel.clone();
            sorted.sort_by(|a, b| b.cmp(a));
            ideal = dcg(&sorted);
        }
        assert!((m.ndcg - dcg(&rel) / ideal).abs() <= TOL);
        for (k, &cut) in ks.iter().enumerate() {
            let hits = rel.iter().take(cut).filter(|&&r| r).count() as f64;
            assert!((m.precision[k] - hits / cut as f64).abs() <= TOL);
            assert!((m.recall[k] - hits / n_pos as f64).abs() <= TOL);
        }
        done += 1;
    }
}

#[test]
fn truncated_ndcg_uses_truncated_ideal() {
    let rel = [false, false, true, true];
    let m = rank_metrics(&rel, 2, &[], Some(2));
    assert_eq!(m.ndcg, 0.0);
    let m = rank_metrics(&rel, 2, &[], Some(3));
    let ideal = 1.0 + 1.0 / 3f64.log2();
    assert!((m.ndcg - 0.5 / ideal).abs() <= TOL);
}

#[test]
fn topk_excludes_training_items_and_users_without_positives() {
    let train = Dataset::new(vec![Interaction::new(0, 0, 1)], 3, 4, Regime::NonRandomized).unwrap();
    let test = Dataset::new(
        vec![
            Interaction::new(0, 1, 1),
            Interaction::new(0, 2, 0),
            Interaction::new(1, 3, 0),
            Interaction::new(2, 2, 1),
        ],
        3,
        4,
        Regime::Randomized,
    )
    .unwrap();
    let index = InteractedIndex::new(3, 4, &[&train]).unwrap();
    // Item 0 would be first for user 0 but is a training item.
    let scorer = |_u: u32, i: u32| -(i as f64);
    let (p, r, ndcg, n) = topk_metrics(&scorer, &test, &index, &[1], None);
    assert_eq!(n, 2);
    // User 0 ranks 1,2,3 (hit at rank 1); user 2 ranks 0,1,2,3 (hit at rank 3).
    let u2 = 1.0 / 4f64.log2();
    assert!((ndcg - (1.0 + u2) / 2.0).abs() <= TOL);
    assert!((p[0] - 0.5).abs() <= TOL && (r[0] - 0.5).abs() <= TOL);
}
