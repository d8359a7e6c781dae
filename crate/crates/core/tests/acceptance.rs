//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p adsel --test acceptance`.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use adsel::graph::{build_affinity, build_laplacian, Sigma};
use adsel::harness::{
    self, decade_grid, derive_seed, grid_search_with, run_ratio_with, AdselSelector, ExperimentConfig,
    FeatureSelector, HyperGrid, RandomSelector,
};
use adsel::metrics::{self, friedman_test, table_from_rows};
use adsel::redundancy::build_redundancy;
use adsel::solver::{self, objective_terms, ObjectiveTerms};
use adsel::{Ablation, Hyperparams};
use common::{oracles, solver_checks};
use ndarray::{array, Array2};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn descent() -> Outcome {
    let start = Instant::now();
    let shapes = [(20, 30), (20, 100), (60, 30), (60, 100)];
    let mut failures = Vec::new();
    for run in 0..50u64 {
        let (d, n) = shapes[run as usize % shapes.len()];
        let ds = common::linear_dataset(run, d, n, 3);
        let s = adsel::fit(&ds, &Hyperparams { seed: run, ..Hyperparams::default() }).unwrap();
        let last = *s.objective_trace.last().unwrap();
        if !(last <= s.initial_objective && last < s.objective_trace[0]) {
            failures.push(run);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(120),
        format!("50 fits, failing runs {failures:?}, {:.1}s (limit 120s)", elapsed.as_secs_f64()),
    )
}

fn w_step() -> Outcome {
    let worst = (0..20).map(solver_checks::w_step_residual).fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("worst |grad|/(1+|W|) {worst:.2e} over 20 states (limit 1e-6)"))
}

fn nonnegativity() -> Outcome {
    let mut lowest = f64::INFINITY;
    for run in 0..20u64 {
        let ds = common::linear_dataset(run + 500, 20 + 2 * run as usize, 30, 3);
        for safeguard in [true, false] {
            let hp = Hyperparams {
                seed: run,
                safeguard,
                ..Hyperparams::default()
            };
            lowest = lowest.min(solver_checks::min_factor_entry(&ds, &hp));
        }
    }
    outcome(lowest >= 0.0, format!("min entry of Q, U over 40 runs: {lowest:e}"))
}

fn metric_oracles() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut r = common::rng(seed);
        let n = r.random_range(2..=20);
        let k = r.random_range(2..=5);
        let conf = Array2::from_shape_simple_fn((n, k), || (r.random_range(0..6) as f64) / 5.0);
        let truth = common::mixed_labels(&mut r, n, k);
        let pred = Array2::from_shape_simple_fn((n, k), || r.random_range(0..2) as f64);
        let (c, t) = (conf.view(), truth.view());
        for gap in [
            metrics::hamming_loss(pred.view(), t).unwrap() - oracles::hamming(&pred, &truth),
            metrics::ranking_loss(c, t).unwrap() - oracles::ranking_loss(&conf, &truth),
            metrics::coverage(c, t).unwrap() - oracles::coverage(&conf, &truth),
            metrics::average_precision(c, t).unwrap() - oracles::average_precision(&conf, &truth),
        ] {
            worst = worst.max(gap.abs());
        }
    }
    let conf = array![[0.9, 0.8, 0.1, 0.0], [0.7, 0.2, 0.3, 0.1]];
    let truth = array![[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]];
    let ap = metrics::average_precision(conf.view(), truth.view()).unwrap();
    let rl = metrics::ranking_loss(conf.view(), truth.view()).unwrap();
    let cv = metrics::coverage(conf.view(), truth.view()).unwrap();
    let hl = metrics::hamming_loss((1.0 - &truth).view(), truth.view()).unwrap();
    // coverage floor: mean of (#relevant - 1)
    let passed = worst <= 1e-12 && ap == 1.0 && rl == 0.0 && cv == 0.5 && hl == 1.0;
    outcome(
        passed,
        format!("max oracle gap {worst:.1e} on 100 instances; perfect AP {ap}, RL {rl}, CV {cv} (floor 0.5); inverted HL {hl}"),
    )
}

fn gradient() -> Outcome {
    let worst = (0..20).map(solver_checks::gradient_gap).fold(0.0, f64::max);
    outcome(worst < 1e-4, format!("worst relative gap {worst:.2e} at 20 points (limit 1e-4)"))
}

fn laplacian() -> Outcome {
    let mut r = common::rng(606);
    let mut row_sum = 0.0f64;
    let mut min_form = f64::INFINITY;
    let mut trace_gap = 0.0f64;
    for _ in 0..5 {
        let x = common::gaussian(&mut r, (5, 40));
        let g = build_affinity(x.view(), 5, Sigma::Auto).unwrap();
        let l = build_laplacian(&g).laplacian;
        for row in l.rows() {
            row_sum = row_sum.max(row.sum().abs());
        }
        for _ in 0..100 {
            let v = common::gaussian(&mut r, (40, 1));
            min_form = min_form.min(v.t().dot(&l).dot(&v)[[0, 0]]);
        }
        let m = common::uniform(&mut r, (40, 3));
        let trace: f64 = (&m * &l.dot(&m)).sum();
        trace_gap = trace_gap.max((trace - oracles::dirichlet_energy(&g.weights, &m)).abs());
    }
    outcome(
        row_sum <= 1e-10 && min_form >= -1e-10 && trace_gap <= 1e-8,
        format!("max |row sum| {row_sum:.1e}, min x'Lx {min_form:.3e}, trace gap {trace_gap:.1e}"),
    )
}

fn redundancy() -> Outcome {
    let mut r = common::rng(707);
    let mut structural = true;
    let mut affine_gap = 0.0f64;
    for _ in 0..50 {
        let d = r.random_range(2..8);
        let n = r.random_range(3..30);
        let x = common::gaussian(&mut r, (d, n));
        let a = build_redundancy(x.view()).values;
        structural &= a == a.t()
            && a.iter().all(|&v| (0.0..=1.0).contains(&v))
            && a.diag().iter().all(|&v| v == 1.0);
        let mut moved = x.clone();
        for mut row in moved.rows_mut() {
            let scale = r.random_range(0.1..10.0) * if r.random::<bool>() { -1.0 } else { 1.0 };
            let shift = r.random_range(-100.0..100.0);
            row.mapv_inplace(|v| scale * v + shift);
        }
        let b = build_redundancy(moved.view()).values;
        affine_gap = a.iter().zip(&b).fold(affine_gap, |g, (u, v)| g.max((u - v).abs()));
    }
    let pair = build_redundancy(array![[1.0, 2.0, 3.0], [1.0, 2.0, 2.0]].view()).values[[0, 1]];
    outcome(
        structural && affine_gap <= 1e-10 && (pair - 0.75).abs() <= 1e-12,
        format!("symmetric/range/diagonal {structural}, affine gap {affine_gap:.1e}, worked pair {pair}"),
    )
}

fn selection_efficacy() -> Outcome {
    let start = Instant::now();
    let ratio = 0.3;
    let base = ExperimentConfig {
        missing_ratios: vec![ratio],
        n_repeats: 1,
        hyper_grid: HyperGrid {
            lambda: decade_grid(),
            alpha: vec![],
            beta: decade_grid(),
            mu: vec![],
            delta: vec![],
        },
        ..ExperimentConfig::default()
    };
    // weights are tuned on planted datasets disjoint from the evaluation seeds
    let tuning: Vec<_> = (1000..1003).map(|s| common::planted_dataset(s, 100, 10, 90).0).collect();
    let grid = grid_search_with(&base, |hp| {
        let selector = AdselSelector {
            hyperparams: hp.clone(),
        };
        let mut total = 0.0;
        for (i, ds) in tuning.iter().enumerate() {
            let rec = run_ratio_with(ds, &base, ratio, &selector, 77 + i as u64)?;
            total += rec.aggregate.get("average_precision").map_or(f64::NAN, |s| s.mean);
        }
        Ok(total / tuning.len() as f64)
    })
    .unwrap();
    let hp = grid.best;

    let (mut adsel_ap, mut random_ap) = (0.0, 0.0);
    for seed in 0..20u64 {
        let (ds, _) = common::planted_dataset(seed, 100, 10, 90);
        let cfg = ExperimentConfig {
            hyperparams: Hyperparams { seed, ..hp.clone() },
            ..base.clone()
        };
        let ds = harness::prepare(&ds, &cfg).unwrap();
        let split = harness::repeat_split(&ds, &cfg, ratio, seed).unwrap();
        let count = 10;
        let chosen = AdselSelector {
            hyperparams: cfg.hyperparams.clone(),
        }
        .select(&split.masked_train, count, seed)
        .unwrap();
        adsel_ap += harness::evaluate_selection(&split, &cfg, &chosen.selected).unwrap().average_precision;
        let mut here = 0.0;
        for draw in 0..50u64 {
            let subset = RandomSelector.select(&split.masked_train, count, derive_seed(seed, 0xA5, draw)).unwrap();
            here += harness::evaluate_selection(&split, &cfg, &subset.selected).unwrap().average_precision;
        }
        random_ap += here / 50.0;
    }
    let (adsel_ap, random_ap) = (adsel_ap / 20.0, random_ap / 20.0);
    let elapsed = start.elapsed();
    outcome(
        adsel_ap > random_ap && elapsed < Duration::from_secs(300),
        format!(
            "tuned lambda={} beta={}; mean AP {adsel_ap:.4} vs random {random_ap:.4} over 20 seeds, {:.1}s (limit 300s)",
            hp.lambda,
            hp.beta,
            elapsed.as_secs_f64()
        ),
    )
}

fn friedman() -> Outcome {
    let table = table_from_rows(&[
        vec![0.9, 0.8, 0.7, 0.6],
        vec![0.5, 0.4, 0.6, 0.7],
        vec![0.3, 0.5, 0.2, 0.1],
    ])
    .unwrap();
    // ranks per setting (1,2,3) (1,3,2) (1,2,3) (2,1,3): mean ranks 1.25, 2, 2.75
    // chi2 = 12*4/(3*4) * (1.5625 + 4 + 7.5625 - 12) = 4.5; F = 3*4.5/(8-4.5) = 27/7
    let r = friedman_test(table.view(), true, 2.484).unwrap();
    let exact = r.chi_square == 4.5 && r.f_f == 27.0 / 7.0;
    let flat = Array2::from_elem((4, 6), 0.5);
    let d = friedman_test(flat.view(), true, 2.484).unwrap();
    let above = friedman_test(table.view(), true, 27.0 / 7.0 + 1e-9).unwrap();
    let decisions = r.reject && !d.reject && !above.reject;
    outcome(
        exact && d.f_f == 0.0 && decisions,
        format!("chi2_F {} F_F {}, degenerate F_F {}, decisions honour critical {}", r.chi_square, r.f_f, d.f_f, decisions),
    )
}

fn ablations() -> Outcome {
    let ds = common::linear_dataset(10, 12, 25, 3);
    let base = Hyperparams {
        max_iter: 40,
        ..Hyperparams::default()
    };
    let run = |ablation: Ablation, check: &mut dyn FnMut(&solver::ModelState, &ObjectiveTerms) -> bool| {
        let hp = Hyperparams {
            ablation,
            ..base.clone()
        };
        let mut ok = true;
        solver::fit_observed(&ds, &hp, |s, p| ok &= check(s, &objective_terms(s, p, &hp))).unwrap();
        ok
    };
    let (eye_q, eye_u) = (Array2::<f64>::eye(25), Array2::<f64>::eye(3));
    let dual = run(Ablation::NoDualSe, &mut |s, _| s.q == eye_q && s.u == eye_u);
    let gfrl = run(Ablation::NoGfrl, &mut |_, t| t.redundancy == 0.0);
    let gmr = run(Ablation::NoGmr, &mut |_, t| t.manifold == 0.0);
    outcome(dual && gfrl && gmr, format!("no_dual_se identity {dual}, no_gfrl mu-term 0 {gfrl}, no_gmr beta-term 0 {gmr}"))
}

fn protocol_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::linear_dataset(21, 15, 50, 3);
    let (x, y) = common::write_csv_pair(dir.path(), &ds);
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"missing_ratios": [0.1, 0.3, 0.5], "n_repeats": 4, "max_iter": 50}"#).unwrap();
    let mut summaries = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_adsel"))
            .arg("experiment")
            .arg("--features")
            .arg(&x)
            .arg("--labels")
            .arg(&y)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("experiment failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        summaries.push(std::fs::read(out.join("summary.csv")).unwrap());
    }
    outcome(
        summaries[0] == summaries[1] && !summaries[0].is_empty(),
        format!("summary.csv {} bytes, identical {}", summaries[0].len(), summaries[0] == summaries[1]),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("descent", descent),
        ("w-step optimality", w_step),
        ("nonnegativity", nonnegativity),
        ("metric oracles", metric_oracles),
        ("gradient check", gradient),
        ("laplacian properties", laplacian),
        ("redundancy properties", redundancy),
        ("selection efficacy", selection_efficacy),
        ("friedman", friedman),
        ("ablation plumbing", ablations),
        ("protocol determinism", protocol_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.passed);
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
