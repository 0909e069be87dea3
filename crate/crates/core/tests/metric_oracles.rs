use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagsim_core::corpus::VideoId;
use tagsim_core::evalkit::{auc, pearson, reduced_mae_ratio, spearman};
use tagsim_core::recommend::{accuracy, diversification, f_measure};

/// Fraction of positive-negative pairs ordered correctly, ties one half.
fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut good, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                good += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    good / pairs
}

fn definition_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn set_f(lists: &[Vec<VideoId>], truth: &[Vec<VideoId>]) -> f64 {
    let mut hits = 0usize;
    for (l, t) in lists.iter().zip(truth) {
        let l: BTreeSet<_> = l.iter().collect();
        let t: BTreeSet<_> = t.iter().collect();
        hits += l.intersection(&t).count();
    }
    let rec: usize = lists.iter().map(Vec::len).sum();
    let rel: usize = truth.iter().map(Vec::len).sum();
    let (p, r) = (hits as f64 / rec as f64, hits as f64 / rel as f64);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn set_diversification(lists: &[Vec<VideoId>], n: usize) -> f64 {
    let t = lists.len();
    let mut shared = 0usize;
    for u in 0..t {
        for v in u + 1..t {
            let a: BTreeSet<_> = lists[u].iter().collect();
            shared += lists[v].iter().filter(|m| a.contains(m)).count();
        }
    }
    1.0 - 2.0 * shared as f64 / (n * t * (t - 1)) as f64
}

fn distinct_list(rng: &mut ChaCha8Rng, len: usize, universe: u32) -> Vec<VideoId> {
    let mut s = BTreeSet::new();
    while s.len() < len {
        s.insert(rng.random_range(0..universe));
    }
    let mut v: Vec<VideoId> = s.into_iter().map(VideoId).collect();
    // order must not matter to either metric
    v.reverse();
    v
}

#[test]
fn auc_matches_pair_counting_on_random_sets_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        let levels = rng.random_range(1..8);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) * 0.25).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let got = auc(&scores, &labels).unwrap();
        assert!((got - brute_auc(&scores, &labels)).abs() < 1e-12);
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(auc(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
    assert_eq!(auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
    assert_eq!(auc(&[0.5, 0.5, 0.5], &[false, true, true]).unwrap(), 0.5);
    assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    assert!(auc(&[0.1], &[true, false]).is_err());
}

#[test]
fn pearson_and_spearman_reference_values() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 4.0, 5.0, 4.0, 5.0];
    // hand computed: sxy = 6, sxx = 10, syy = 6
    assert!((pearson(&x, &y).unwrap() - 6.0 / 60f64.sqrt()).abs() < 1e-15);
    assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0, 25.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!(pearson(&x, &[3.0; 5]).is_err());
    assert!(pearson(&[1.0], &[1.0]).is_err());
}

#[test]
fn reduced_mae_reference_values() {
    let target = [0.0, 1.0, 2.0, 3.0];
    // baseline mean 1.5 gives MAE 1; perfect predictions reduce it fully
    assert_eq!(reduced_mae_ratio(&target, &target, 1.5).unwrap(), 100.0);
    assert!((reduced_mae_ratio(&[0.5, 1.0, 2.0, 2.5], &target, 1.5).unwrap() - 75.0).abs() < 1e-12);
    assert!(reduced_mae_ratio(&[1.0, 1.0], &[1.0, 1.0], 1.0).is_err());
}

#[test]
fn f_and_diversification_match_set_oracles_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let t = rng.random_range(2..12);
        let n = rng.random_range(1..9);
        let universe = rng.random_range(n as u32..40);
        let lists: Vec<_> = (0..t).map(|_| distinct_list(&mut rng, n, universe)).collect();
        let truth: Vec<_> = (0..t).map(|_| { let k = rng.random_range(1..10); distinct_list(&mut rng, k, universe.max(10)) }).collect();
        assert_eq!(f_measure(&lists, &truth), set_f(&lists, &truth));
        assert_eq!(diversification(&lists, n).unwrap(), set_diversification(&lists, n));
    }
}

#[test]
fn diversification_extremes() {
    let same = vec![vec![VideoId(1), VideoId(2)]; 4];
    assert_eq!(diversification(&same, 2).unwrap(), 0.0);
    let disjoint = vec![vec![VideoId(1), VideoId(2)], vec![VideoId(3), VideoId(4)]];
    assert_eq!(diversification(&disjoint, 2).unwrap(), 1.0);
    assert!(diversification(&same[..1], 2).is_err());
}

#[test]
fn accuracy_pools_counts() {
    let lists = vec![vec![VideoId(1), VideoId(2)], vec![VideoId(5)]];
    let truth = vec![vec![VideoId(2)], vec![VideoId(5), VideoId(6), VideoId(7)]];
    let a = accuracy(&lists, &truth);
    assert_eq!((a.precision, a.recall), (2.0 / 3.0, 0.5));
}

proptest! {
    #[test]
    fn pearson_matches_the_definition(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..80)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((r - definition_pearson(&x, &y)).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(scores in prop::collection::vec(-5f64..5.0, 4..40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<bool> = scores.iter().map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let a = auc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
        prop_assert!((a - auc(&mapped, &labels).unwrap()).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((a + auc(&flipped, &labels).unwrap() - 1.0).abs() < 1e-12);
    }
}
