//! One function per subcommand.

use std::path::{Path, PathBuf};

use adsel::data::format_csv_matrix;
use adsel::harness::{self, ExperimentConfig, MetricSummary, Weight};
use adsel::metrics::{self, METRIC_NAMES};
use adsel::solver::{self, ObjectiveTerms, Problem};
use adsel::{rank_features, select_top, Budget, Dataset, Error, FeatureRanking, Hyperparams, ModelState, Result};
use serde::{Deserialize, Serialize};

use crate::config::{self, ProtocolFlags, SolverFlags};
use crate::inputs::{self, DataArgs};
use crate::manifest::{InputDigest, OutputDir};
use crate::SelectArgs;

#[derive(Debug, Serialize, Deserialize)]
struct RankingFile {
    /// Feature indices, most important first.
    order: Vec<usize>,
    /// Row norms of `W`, indexed by feature.
    scores: Vec<f64>,
    /// Feature names in ranking order, when the input had a header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct ModelFile<'a> {
    n_features: usize,
    n_samples: usize,
    n_labels: usize,
    iterations: usize,
    converged: bool,
    initial_objective: f64,
    final_objective: f64,
    terms: ObjectiveTerms,
    hyperparams: &'a Hyperparams,
    feature_names: Option<&'a [String]>,
    /// `d x k`, one row per feature.
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    u: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct SelectionFile<'a> {
    count: usize,
    selected: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

fn rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn named(ds_names: Option<&[String]>, idx: &[usize]) -> Option<Vec<String>> {
    ds_names.map(|n| idx.iter().map(|&i| n[i].clone()).collect())
}

struct Fitted {
    ds: Dataset,
    state: ModelState,
    ranking: FeatureRanking,
    trace: String,
    terms: ObjectiveTerms,
}

const TRACE_HEADER: &str = "iteration,objective,regression,w_sparsity,reconstruction,u_sparsity,manifold,redundancy\n";

fn trace_row(iter: usize, t: &ObjectiveTerms) -> String {
    format!(
        "{iter},{},{},{},{},{},{},{}\n",
        t.total(),
        t.regression,
        t.w_sparsity,
        t.reconstruction,
        t.u_sparsity,
        t.manifold,
        t.redundancy
    )
}

fn fit_dataset(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Fitted> {
    let ds = harness::prepare(ds, cfg)?;
    let hp = &cfg.hyperparams;
    let problem = Problem::new(&ds, hp)?;
    let init = solver::init_state(&ds, hp);
    let mut trace = String::from(TRACE_HEADER);
    trace.push_str(&trace_row(0, &solver::objective_terms(&init, &problem, hp)));
    let mut terms = None;
    let state = solver::fit_observed(&ds, hp, |s, p| {
        let t = solver::objective_terms(s, p, hp);
        trace.push_str(&trace_row(s.iter, &t));
        terms = Some(t);
    })?;
    let terms = terms.expect("fit runs at least one iteration");
    let ranking = rank_features(state.w.view());
    Ok(Fitted {
        ds,
        state,
        ranking,
        trace,
        terms,
    })
}

fn converged(state: &ModelState, hp: &Hyperparams) -> bool {
    let t = &state.objective_trace;
    let prev = if t.len() >= 2 { t[t.len() - 2] } else { state.initial_objective };
    t.last().is_some_and(|&last| (last - prev).abs() / prev.max(1.0) < hp.tol)
}

fn write_fit(out: &mut OutputDir, f: &Fitted, hp: &Hyperparams) -> Result<()> {
    let names = f.ds.features.names();
    out.write_json(
        "ranking.json",
        &RankingFile {
            order: f.ranking.order.clone(),
            scores: f.ranking.scores.clone(),
            names: named(names, &f.ranking.order),
        },
    )?;
    out.write("trace.csv", &f.trace)?;
    out.write_json(
        "model.json",
        &ModelFile {
            n_features: f.ds.n_features(),
            n_samples: f.ds.n_samples(),
            n_labels: f.ds.n_labels(),
            iterations: f.state.iter,
            converged: converged(&f.state, hp),
            initial_objective: f.state.initial_objective,
            final_objective: f.terms.total(),
            terms: f.terms,
            hyperparams: hp,
            feature_names: names,
            w: rows(&f.state.w),
            b: f.state.b.to_vec(),
            u: rows(&f.state.u),
        },
    )
}

pub fn fit(data: &DataArgs, solver_flags: &SolverFlags, out: &Path) -> Result<()> {
    let (cfg, raw) = config::resolve(solver_flags, None)?;
    let (ds, digests) = data.load(cfg.binarization_threshold)?;
    let fitted = fit_dataset(&ds, &cfg)?;
    let mut dir = OutputDir::create(out)?;
    write_fit(&mut dir, &fitted, &cfg.hyperparams)?;
    let dir = dir.finish("fit", &cfg, raw.as_deref(), &digests)?;
    println!(
        "fit: {} iterations, objective {:.6e} -> {:.6e}; wrote {}",
        fitted.state.iter,
        fitted.state.initial_objective,
        fitted.terms.total(),
        dir.display()
    );
    Ok(())
}

pub fn select(args: &SelectArgs) -> Result<()> {
    let (cfg, raw) = config::resolve(&args.solver, None)?;
    let budget = match (args.count, args.budget) {
        (Some(c), _) => Budget::Count(c),
        (None, Some(f)) => Budget::Fraction(f),
        (None, None) => Budget::Fraction(cfg.budget),
    };
    let mut dir = OutputDir::create(&args.out)?;
    let mut digests: Vec<InputDigest> = Vec::new();
    let (ranking, names) = match (&args.ranking, &args.features) {
        (Some(path), _) => {
            let bytes = inputs::read("ranking", path, &mut digests)?;
            let file: RankingFile = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            check_ranking(&file, path)?;
            // names in the file follow ranking order; re-index by feature
            let names = file.names.as_ref().map(|n| {
                let mut by_index = vec![String::new(); n.len()];
                for (name, &i) in n.iter().zip(&file.order) {
                    by_index[i] = name.clone();
                }
                by_index
            });
            (
                FeatureRanking {
                    order: file.order,
                    scores: file.scores,
                },
                names,
            )
        }
        (None, Some(features)) => {
            let data = DataArgs {
                features: features.clone(),
                labels: args.labels.clone().expect("clap requires labels with features"),
                mask: args.mask.clone(),
                groups: None,
                layout: args.layout,
                ratings: args.ratings,
            };
            let (ds, d) = data.load(cfg.binarization_threshold)?;
            digests = d;
            let fitted = fit_dataset(&ds, &cfg)?;
            write_fit(&mut dir, &fitted, &cfg.hyperparams)?;
            let names = fitted.ds.features.names().map(<[String]>::to_vec);
            (fitted.ranking, names)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let selected = select_top(&ranking, budget)?;
    dir.write_json(
        "selected.json",
        &SelectionFile {
            count: selected.len(),
            selected: &selected,
            names: named(names.as_deref(), &selected),
        },
    )?;
    let dir = dir.finish("select", &cfg, raw.as_deref(), &digests)?;
    println!("select: kept {} of {} features; wrote {}", selected.len(), ranking.order.len(), dir.display());
    Ok(())
}

fn check_ranking(file: &RankingFile, path: &Path) -> Result<()> {
    let d = file.order.len();
    let mut seen = vec![false; d];
    for &i in &file.order {
        if i >= d || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Config(format!("{}: order is not a permutation of 0..{d}", path.display())));
        }
    }
    if file.scores.len() != d || file.names.as_ref().is_some_and(|n| n.len() != d) {
        return Err(Error::Config(format!("{}: order, scores and names differ in length", path.display())));
    }
    Ok(())
}

fn print_records(records: &[harness::RunRecord]) {
    for rec in records {
        let cells: Vec<String> = METRIC_NAMES
            .iter()
            .map(|m| {
                let s = rec.aggregate.get(m).unwrap_or(MetricSummary { mean: f64::NAN, std: f64::NAN });
                format!("{m} {:.4}±{:.4}", s.mean, s.std)
            })
            .collect();
        println!(
            "ratio {}: {} ({}/{} repeats ok)",
            rec.missing_ratio,
            cells.join(", "),
            rec.aggregate.n_ok,
            rec.repeats.len()
        );
    }
}

pub fn experiment(data: &DataArgs, solver_flags: &SolverFlags, protocol: &ProtocolFlags, tune: bool, out: &Path) -> Result<()> {
    let (cfg, raw) = config::resolve(solver_flags, Some(protocol))?;
    let (ds, digests) = data.load(cfg.binarization_threshold)?;
    let mut dir = OutputDir::create(out)?;
    let records = if tune {
        let (grids, records) = harness::run_tuned_experiment(&ds, &cfg)?;
        dir.write_json("grid.json", &grids)?;
        records
    } else {
        harness::run_experiment(&ds, &cfg)?
    };
    if records.iter().all(|r| r.aggregate.n_ok == 0) {
        let first = records
            .iter()
            .flat_map(|r| &r.repeats)
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::Config(format!("every repeat failed; first error: {first}")));
    }
    dir.write("summary.csv", harness::summary_csv(&records))?;
    for m in METRIC_NAMES {
        dir.write(&format!("plot_{m}.csv"), harness::plot_csv(&records, m))?;
    }
    dir.write_json("records.json", &records)?;
    let effective = records.first().map_or(cfg.clone(), |r| ExperimentConfig {
        hyperparams: r.config.hyperparams.clone(),
        ..cfg.clone()
    });
    print_records(&records);
    let dir = dir.finish("experiment", &effective, raw.as_deref(), &digests)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn sweep(
    data: &DataArgs,
    solver_flags: &SolverFlags,
    protocol: &ProtocolFlags,
    parameter: Weight,
    out: &Path,
) -> Result<()> {
    let (cfg, raw) = config::resolve(solver_flags, Some(protocol))?;
    let (ds, digests) = data.load(cfg.binarization_threshold)?;
    let rows = harness::sensitivity_sweep(&ds, &cfg, parameter)?;
    let mut dir = OutputDir::create(out)?;
    dir.write("sweep.csv", harness::sweep_csv(&rows))?;
    dir.write_json("sweep.json", &rows)?;
    for row in &rows {
        let ap = row.aggregate.get("average_precision").unwrap_or(MetricSummary { mean: f64::NAN, std: f64::NAN });
        println!("{}={}: average_precision {:.4}±{:.4}", parameter.name(), row.value, ap.mean, ap.std);
    }
    let dir = dir.finish("sweep", &cfg, raw.as_deref(), &digests)?;
    println!("wrote {}", dir.display());
    Ok(())
}

/// A score table with optional method names.
struct ScoreTable {
    names: Option<Vec<String>>,
    values: ndarray::Array2<f64>,
}

fn parse_score_table(bytes: &[u8], path: &Path) -> Result<ScoreTable> {
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    let numeric = |c: &str| c.parse::<f64>().is_ok();
    let body_start = usize::from(rows.first().is_some_and(|r| r.iter().skip(1).any(|c| !numeric(c))));
    let body = &rows[body_start.min(rows.len())..];
    if body.is_empty() {
        return Err(bad("no score rows".into()));
    }
    let has_names = body.iter().all(|r| r.first().is_some_and(|c| !numeric(c)));
    let first_col = usize::from(has_names);
    let width = body[0].len();
    let mut values = ndarray::Array2::zeros((body.len(), width.saturating_sub(first_col)));
    for (i, r) in body.iter().enumerate() {
        if r.len() != width {
            return Err(bad(format!("row {} has {} cells, expected {width}", i + 1 + body_start, r.len())));
        }
        for (j, c) in r[first_col..].iter().enumerate() {
            values[[i, j]] = c
                .parse()
                .map_err(|_| bad(format!("row {}: cannot parse {c:?} as a number", i + 1 + body_start)))?;
        }
    }
    Ok(ScoreTable {
        names: has_names.then(|| body.iter().map(|r| r[0].clone()).collect()),
        values,
    })
}

pub fn friedman(tables: &[PathBuf], critical: f64, higher_is_better: bool) -> Result<()> {
    if !critical.is_finite() {
        return Err(Error::Config(format!("critical value must be finite, got {critical}")));
    }
    for path in tables {
        let mut digests = Vec::new();
        let bytes = inputs::read("table", path, &mut digests)?;
        let table = parse_score_table(&bytes, path)?;
        let r = metrics::friedman_test(table.values.view(), higher_is_better, critical)?;
        let (k, n) = table.values.dim();
        println!(
            "{}: methods={k} settings={n} chi2_F={} F_F={} critical={critical} decision={}",
            path.display(),
            r.chi_square,
            r.f_f,
            if r.reject { "reject" } else { "accept" }
        );
        let labels: Vec<String> = match &table.names {
            Some(names) => names.clone(),
            None => (0..k).map(|i| format!("method{}", i + 1)).collect(),
        };
        let ranks: Vec<String> = labels
            .iter()
            .zip(&r.mean_ranks)
            .map(|(name, rank)| format!("{name}={rank}"))
            .collect();
        println!("  mean ranks: {}", ranks.join(" "));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MaskingConfig {
    missing_ratio: f64,
    seed: u64,
    ratings_threshold: Option<f64>,
}

pub fn simulate_missing(labels: &Path, ratio: f64, seed: u64, ratings_threshold: Option<f64>, out: &Path) -> Result<()> {
    let mut digests = Vec::new();
    let y = inputs::load_labels(labels, ratings_threshold, &mut digests)?;
    let masked = harness::simulate_missing(&y, ratio, seed)?;
    let header = y.names();
    let mut dir = OutputDir::create(out)?;
    dir.write("labels_observed.csv", format_csv_matrix(masked.labels.values(), header))?;
    dir.write("mask.csv", format_csv_matrix(masked.mask.values(), header))?;
    dir.write("hidden.csv", format_csv_matrix(masked.hidden.values(), header))?;
    let cfg = MaskingConfig {
        missing_ratio: ratio,
        seed,
        ratings_threshold,
    };
    let dir = dir.finish("simulate-missing", &cfg, None, &digests)?;
    println!(
        "simulate-missing: removed {} labels per column; wrote {}",
        (ratio * y.n_samples() as f64).round(),
        dir.display()
    );
    Ok(())
}
