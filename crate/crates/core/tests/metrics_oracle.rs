mod common;

use adsel::metrics::{self, friedman_test, table_from_rows};
use common::oracles;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

fn instance(seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut r = common::rng(seed);
    let n = r.random_range(2..=20);
    let k = r.random_range(2..=5);
    // coarse confidences so ties are common
    let conf = Array2::from_shape_simple_fn((n, k), || (r.random_range(0..6) as f64) / 5.0);
    let mut truth = common::mixed_labels(&mut r, n, k);
    if n > 2 {
        // one degenerate row to exercise skipping
        truth.row_mut(0).fill(1.0);
    }
    let pred = Array2::from_shape_simple_fn((n, k), || r.random_range(0..2) as f64);
    (pred, conf, truth)
}

#[test]
fn metrics_match_brute_force_on_random_instances() {
    for seed in 0..100 {
        let (pred, conf, truth) = instance(seed);
        let (c, t) = (conf.view(), truth.view());
        let hl = metrics::hamming_loss(pred.view(), t).unwrap();
        assert!((hl - oracles::hamming(&pred, &truth)).abs() < 1e-12);
        assert!((metrics::ranking_loss(c, t).unwrap() - oracles::ranking_loss(&conf, &truth)).abs() < 1e-12);
        assert!((metrics::coverage(c, t).unwrap() - oracles::coverage(&conf, &truth)).abs() < 1e-12);
        assert!((metrics::average_precision(c, t).unwrap() - oracles::average_precision(&conf, &truth)).abs() < 1e-12);
    }
}

#[test]
fn hand_examples() {
    let truth = array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    let pred = array![[1.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
    assert_eq!(metrics::hamming_loss(pred.view(), truth.view()).unwrap(), 2.0 / 6.0);
    assert_eq!(metrics::hamming_loss((1.0 - &truth).view(), truth.view()).unwrap(), 1.0);

    // one relevant label ranked 2nd of 3
    let conf = array![[0.9, 0.5, 0.1]];
    let t = array![[0.0, 1.0, 0.0]];
    assert_eq!(metrics::average_precision(conf.view(), t.view()).unwrap(), 0.5);
    // single relevant label ranked last of 3
    let t = array![[0.0, 0.0, 1.0]];
    assert_eq!(metrics::coverage(conf.view(), t.view()).unwrap(), 2.0);
    assert_eq!(metrics::ranking_loss(conf.view(), t.view()).unwrap(), 1.0);
}

#[test]
fn perfect_ranking_floors() {
    let conf = array![[0.9, 0.8, 0.1, 0.0], [0.7, 0.2, 0.3, 0.1]];
    let truth = array![[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]];
    assert_eq!(metrics::average_precision(conf.view(), truth.view()).unwrap(), 1.0);
    assert_eq!(metrics::ranking_loss(conf.view(), truth.view()).unwrap(), 0.0);
    // (#relevant - 1) averaged: (1 + 0) / 2
    assert_eq!(metrics::coverage(conf.view(), truth.view()).unwrap(), 0.5);
}

#[test]
fn evaluate_counts_skipped_rows() {
    let truth = array![[1.0, 1.0], [0.0, 0.0], [1.0, 0.0]];
    let conf = array![[0.5, 0.5], [0.5, 0.5], [0.9, 0.1]];
    let r = metrics::evaluate(truth.view(), conf.view(), truth.view()).unwrap();
    assert_eq!(r.skipped_samples, 2);
    assert_eq!(r.average_precision, 1.0);
}

#[test]
fn no_eligible_rows_is_an_error() {
    let t = array![[1.0, 1.0]];
    assert!(metrics::ranking_loss(t.view(), t.view()).is_err());
    assert!(metrics::hamming_loss(t.view(), array![[1.0]].view()).is_err());
}

#[test]
fn friedman_toy_and_degenerate() {
    let table = table_from_rows(&[
        vec![0.9, 0.8, 0.7, 0.6],
        vec![0.5, 0.4, 0.6, 0.7],
        vec![0.3, 0.5, 0.2, 0.1],
    ])
    .unwrap();
    let r = friedman_test(table.view(), true, 2.484).unwrap();
    // ranks per setting: (1,2,3) (1,3,2) (1,2,3) (2,1,3)
    assert_eq!(r.mean_ranks, vec![1.25, 2.0, 2.75]);
    let sum_sq = 1.25f64.powi(2) + 4.0 + 2.75f64.powi(2);
    let chi = 12.0 * 4.0 / 12.0 * (sum_sq - 3.0 * 16.0 / 4.0);
    assert_eq!(r.chi_square, chi);
    assert_eq!(r.f_f, 3.0 * chi / (4.0 * 2.0 - chi));
    assert!(r.reject);

    let flat = Array2::from_elem((15, 6), 0.5);
    let r = friedman_test(flat.view(), true, 2.484).unwrap();
    assert_eq!((r.chi_square, r.f_f, r.reject), (0.0, 0.0, false));
}

proptest! {
    #[test]
    fn rank_metrics_ignore_monotone_transforms(seed in 0u64..1000, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let (_, conf, truth) = instance(seed);
        let moved = conf.mapv(|c| (scale * c + shift).exp());
        let (a, b) = (conf.view(), moved.view());
        prop_assert_eq!(metrics::ranking_loss(a, truth.view()).unwrap(), metrics::ranking_loss(b, truth.view()).unwrap());
        prop_assert_eq!(metrics::coverage(a, truth.view()).unwrap(), metrics::coverage(b, truth.view()).unwrap());
        prop_assert_eq!(metrics::average_precision(a, truth.view()).unwrap(), metrics::average_precision(b, truth.view()).unwrap());
    }

    #[test]
    fn metric_ranges(seed in 0u64..1000) {
        let (pred, conf, truth) = instance(seed);
        let r = metrics::evaluate(pred.view(), conf.view(), truth.view()).unwrap();
        let k = truth.ncols() as f64;
        prop_assert!((0.0..=1.0).contains(&r.hamming_loss));
        prop_assert!((0.0..=1.0).contains(&r.ranking_loss));
        prop_assert!((0.0..=k - 1.0).contains(&r.coverage));
        prop_assert!((0.0..=1.0).contains(&r.average_precision));
    }
}
