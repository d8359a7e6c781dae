//! Measurements over solver states shared by the property tests and the
//! acceptance suite. Each returns the raw quantity so callers pick the bound.
#![allow(dead_code)]

use adsel::solver::{self, ModelState, Problem};
use adsel::{Dataset, Hyperparams};
use ndarray::Array2;
use rand::Rng;

use super::{gaussian, linear_dataset, rng};

/// A state with every entry of `Q`, `U` in `[0.1, 1)` and Gaussian `W`, so
/// all rows are far from the nondifferentiable point.
pub fn random_state(ds: &Dataset, hp: &Hyperparams, seed: u64) -> ModelState {
    let mut r = rng(seed);
    let mut s = solver::init_state(ds, hp);
    s.w = gaussian(&mut r, s.w.dim());
    s.q = Array2::from_shape_simple_fn(s.q.dim(), || r.random_range(0.1..1.0));
    s.u = Array2::from_shape_simple_fn(s.u.dim(), || r.random_range(0.1..1.0));
    s.d = solver::reweight_rows(s.w.view(), hp.epsilon);
    s.v = solver::reweight_rows(s.u.view(), hp.epsilon);
    s
}

/// `|grad| / (1 + |W|)` of the `W` subproblem right after `update_w`, with
/// `D` left as it was.
pub fn w_step_residual(seed: u64) -> f64 {
    let mut r = rng(seed + 7_000);
    let d = r.random_range(5..30);
    let n = r.random_range(10..40);
    let ds = linear_dataset(seed, d, n, 3);
    let hp = Hyperparams {
        lambda: 10f64.powi(r.random_range(-2..3)),
        mu: 10f64.powi(r.random_range(-2..3)),
        delta: 10f64.powi(r.random_range(-2..3)),
        q: 3,
        ..Hyperparams::default()
    };
    let problem = Problem::new(&ds, &hp).unwrap();
    let mut s = random_state(&ds, &hp, seed);
    s.w = solver::update_w(&s, &problem, &hp).unwrap();
    let g = solver::w_step_gradient(&s, &problem, &hp);
    frob(&g) / (1.0 + frob(&s.w))
}

fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative gap between the analytic directional derivative and a central
/// difference along a random direction in `(W, Q, U)`.
pub fn gradient_gap(seed: u64) -> f64 {
    let ds = linear_dataset(seed, 8, 12, 3);
    let hp = Hyperparams {
        lambda: 0.7,
        alpha: 1.3,
        beta: 0.4,
        mu: 0.9,
        delta: 1.1,
        q: 3,
        ..Hyperparams::default()
    };
    let problem = Problem::new(&ds, &hp).unwrap();
    let s = random_state(&ds, &hp, seed);
    let g = solver::objective_gradient(&s, &problem, &hp);
    let mut r = rng(seed + 1_000);
    let dw = gaussian(&mut r, s.w.dim());
    let dq = gaussian(&mut r, s.q.dim());
    let du = gaussian(&mut r, s.u.dim());
    let analytic = (&g.w * &dw).sum() + (&g.q * &dq).sum() + (&g.u * &du).sum();

    let at = |t: f64| {
        let mut p = s.clone();
        p.w.scaled_add(t, &dw);
        p.q.scaled_add(t, &dq);
        p.u.scaled_add(t, &du);
        solver::objective(&p, &problem, &hp)
    };
    let h = 1e-5;
    let numeric = (at(h) - at(-h)) / (2.0 * h);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs())
}

/// Smallest entry of `Q` and `U` seen after any iteration of a fit.
pub fn min_factor_entry(ds: &Dataset, hp: &Hyperparams) -> f64 {
    let mut lowest = f64::INFINITY;
    solver::fit_observed(ds, hp, |s, _| {
        for &v in s.q.iter().chain(s.u.iter()) {
            lowest = lowest.min(v);
        }
    })
    .unwrap();
    lowest
}
