mod common;

use adsel::redundancy::build_redundancy;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn worked_pair() {
    let r = build_redundancy(array![[1.0, 2.0, 3.0], [1.0, 2.0, 2.0]].view());
    assert!((r.values[[0, 1]] - 0.75).abs() < 1e-12);
}

proptest! {
    #[test]
    fn structure_and_affine_invariance(seed in 0u64..500) {
        let mut r = common::rng(seed);
        let d = r.random_range(2..8);
        let n = r.random_range(3..30);
        let x = common::gaussian(&mut r, (d, n));
        let a = build_redundancy(x.view()).values;
        prop_assert_eq!(&a, &a.t());
        prop_assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(a.diag().iter().all(|&v| v == 1.0));

        let mut moved = Array2::zeros((d, n));
        for i in 0..d {
            let mut scale: f64 = r.random_range(0.1..10.0);
            if r.random::<bool>() {
                scale = -scale;
            }
            let shift: f64 = r.random_range(-100.0..100.0);
            for t in 0..n {
                moved[[i, t]] = scale * x[[i, t]] + shift;
            }
        }
        let b = build_redundancy(moved.view()).values;
        for (u, v) in a.iter().zip(b.iter()) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }
}
