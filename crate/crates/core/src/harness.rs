//! End-to-end evaluation protocol: mask training labels, split, select
//! features, classify with ML-KNN, score, and aggregate over repeats.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_features, Dataset, LabelMatrix, MaskMatrix, Normalization};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport, METRIC_NAMES};
use crate::mlknn::{self, DEFAULT_NEIGHBOURS, DEFAULT_SMOOTHING};
use crate::ranking::{rank_features, Budget};
use crate::solver::{self, Hyperparams};

/// Which labels the evaluating classifier is trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorLabels {
    #[default]
    Full,
    Masked,
}

impl std::str::FromStr for EvaluatorLabels {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "masked" => Ok(Self::Masked),
            _ => Err(format!("unknown evaluator labels {s:?} (full, masked)")),
        }
    }
}

/// Candidate values per trade-off weight. An empty list holds the weight at
/// its base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
}

/// `10^-3, 10^-2, ..., 10^3`.
pub fn decade_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            lambda: decade_grid(),
            alpha: decade_grid(),
            beta: decade_grid(),
            mu: decade_grid(),
            delta: decade_grid(),
        }
    }
}

/// The five trade-off weights, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    Lambda,
    Alpha,
    Beta,
    Mu,
    Delta,
}

impl Weight {
    pub const ALL: [Weight; 5] = [Weight::Lambda, Weight::Alpha, Weight::Beta, Weight::Mu, Weight::Delta];

    pub fn name(self) -> &'static str {
        match self {
            Weight::Lambda => "lambda",
            Weight::Alpha => "alpha",
            Weight::Beta => "beta",
            Weight::Mu => "mu",
            Weight::Delta => "delta",
        }
    }

    pub fn get(self, hp: &Hyperparams) -> f64 {
        match self {
            Weight::Lambda => hp.lambda,
            Weight::Alpha => hp.alpha,
            Weight::Beta => hp.beta,
            Weight::Mu => hp.mu,
            Weight::Delta => hp.delta,
        }
    }

    pub fn set(self, hp: &mut Hyperparams, value: f64) {
        match self {
            Weight::Lambda => hp.lambda = value,
            Weight::Alpha => hp.alpha = value,
            Weight::Beta => hp.beta = value,
            Weight::Mu => hp.mu = value,
            Weight::Delta => hp.delta = value,
        }
    }

    fn values(self, grid: &HyperGrid) -> &[f64] {
        match self {
            Weight::Lambda => &grid.lambda,
            Weight::Alpha => &grid.alpha,
            Weight::Beta => &grid.beta,
            Weight::Mu => &grid.mu,
            Weight::Delta => &grid.delta,
        }
    }
}

impl std::str::FromStr for Weight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Weight::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter {s:?} (lambda, alpha, beta, mu, delta)")))
    }
}

/// Protocol settings. Serialised flat: the solver's hyperparameters sit at
/// the top level next to the protocol fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub missing_ratios: Vec<f64>,
    pub n_repeats: usize,
    pub train_fraction: f64,
    /// Share of features kept after ranking.
    pub budget: f64,
    pub hyper_grid: HyperGrid,
    /// Ratings at or above this become positive labels.
    pub binarization_threshold: f64,
    pub normalization: Normalization,
    pub evaluator_labels: EvaluatorLabels,
    pub mlknn_k: usize,
    pub mlknn_smoothing: f64,
    /// Tune the grid separately for each missing ratio instead of once.
    pub tune_per_ratio: bool,
    /// Repeats used to score each grid point.
    pub grid_repeats: usize,
    #[serde(flatten)]
    pub hyperparams: Hyperparams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            missing_ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            n_repeats: 50,
            train_fraction: 0.7,
            budget: 0.10,
            hyper_grid: HyperGrid::default(),
            binarization_threshold: 5.0,
            normalization: Normalization::Zscore,
            evaluator_labels: EvaluatorLabels::Full,
            mlknn_k: DEFAULT_NEIGHBOURS,
            mlknn_smoothing: DEFAULT_SMOOTHING,
            tune_per_ratio: false,
            grid_repeats: 3,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(r) = self.missing_ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return bad(format!("missing ratio {r} outside [0, 1)"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if self.n_repeats == 0 {
            return bad("n_repeats must be at least 1".into());
        }
        Budget::Fraction(self.budget)
            .resolve(1)
            .map_err(|_| Error::Config(format!("budget {} outside (0, 1]", self.budget)))?;
        self.hyperparams.validate()?;
        Ok(())
    }
}

/// Deterministic seed stream: mixes a base seed with a tag and an index.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_SPLIT: u64 = 1;
const TAG_MASK: u64 = 2;
const TAG_FIT: u64 = 3;
const TAG_GRID: u64 = 4;

/// Labels with a simulated share of entries removed.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedLabels {
    /// Observed labels, 0 at removed cells.
    pub labels: LabelMatrix,
    pub mask: MaskMatrix,
    /// Removed truth at masked cells, 0 elsewhere.
    pub hidden: LabelMatrix,
}

/// Removes exactly `round(ratio * n)` entries from every label column,
/// chosen uniformly without replacement.
pub fn simulate_missing(y: &LabelMatrix, ratio: f64, seed: u64) -> Result<MaskedLabels> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("missing ratio {ratio} outside [0, 1)")));
    }
    let (n, k) = y.values().dim();
    let per_column = (ratio * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = y.values().clone();
    let mut mask = Array2::ones((n, k));
    let mut hidden = Array2::zeros((n, k));
    for j in 0..k {
        for i in index::sample(&mut rng, n, per_column) {
            mask[[i, j]] = 0.0;
            hidden[[i, j]] = labels[[i, j]];
            labels[[i, j]] = 0.0;
        }
    }
    let names = y.names().map(<[String]>::to_vec);
    Ok(MaskedLabels {
        labels: LabelMatrix::new(labels).with_names(names.clone()),
        mask: MaskMatrix::new(mask),
        hidden: LabelMatrix::new(hidden).with_names(names),
    })
}

/// `1` where the rating reaches the threshold (inclusive).
pub fn binarize_labels(ratings: &Array2<f64>, threshold: f64) -> LabelMatrix {
    LabelMatrix::new(ratings.mapv(|r| if r >= threshold { 1.0 } else { 0.0 }))
}

/// Seeded train/test partition. With group identifiers, whole groups go to
/// one side.
pub fn split_samples(ds: &Dataset, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n = ds.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = match &ds.groups {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let cut = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
            let test = idx.split_off(cut);
            (idx, test)
        }
        Some(groups) => {
            let ids: BTreeSet<&String> = groups.iter().collect();
            let mut ids: Vec<&String> = ids.into_iter().collect();
            ids.shuffle(&mut rng);
            let cut = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len().max(2) - 1);
            let train_ids: BTreeSet<&String> = ids[..cut].iter().copied().collect();
            (0..n).partition(|&i| train_ids.contains(&groups[i]))
        }
    };
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Features picked by a selector, plus solver diagnostics when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub selected: Vec<usize>,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

/// Chooses `count` features from a (masked) training set.
pub trait FeatureSelector: Sync {
    fn select(&self, train: &Dataset, count: usize, seed: u64) -> Result<Selection>;
}

/// The dual self-expression selector.
#[derive(Debug, Clone)]
pub struct AdselSelector {
    pub hyperparams: Hyperparams,
}

impl FeatureSelector for AdselSelector {
    fn select(&self, train: &Dataset, count: usize, seed: u64) -> Result<Selection> {
        let hp = Hyperparams {
            seed,
            ..self.hyperparams.clone()
        };
        let state = solver::fit(train, &hp)?;
        let ranking = rank_features(state.w.view());
        Ok(Selection {
            selected: ranking.order[..count].to_vec(),
            iterations: state.iter,
            objective_trace: state.objective_trace,
        })
    }
}

/// Uniformly random subsets; the baseline any selector should beat.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSelector;

impl FeatureSelector for RandomSelector {
    fn select(&self, train: &Dataset, count: usize, seed: u64) -> Result<Selection> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Selection {
            selected: index::sample(&mut rng, train.n_features(), count).into_vec(),
            iterations: 0,
            objective_trace: Vec::new(),
        })
    }
}

/// A ranking produced elsewhere (e.g. by a competing method).
#[derive(Debug, Clone)]
pub struct FixedRanking(pub Vec<usize>);

impl FeatureSelector for FixedRanking {
    fn select(&self, train: &Dataset, count: usize, _seed: u64) -> Result<Selection> {
        if self.0.len() != train.n_features() || self.0.iter().any(|&i| i >= train.n_features()) {
            return Err(Error::Config(format!(
                "external ranking has {} entries for {} features",
                self.0.len(),
                train.n_features()
            )));
        }
        Ok(Selection {
            selected: self.0[..count].to_vec(),
            iterations: 0,
            objective_trace: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation of each metric over successful
/// repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_ok: usize,
    pub metrics: Vec<(String, MetricSummary)>,
}

impl Aggregate {
    pub fn from_reports(reports: &[MetricReport]) -> Self {
        let metrics = METRIC_NAMES
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let vals: Vec<f64> = reports.iter().map(|r| r.values()[m]).collect();
                ((*name).to_owned(), summarize(&vals))
            })
            .collect();
        Self {
            n_ok: reports.len(),
            metrics,
        }
    }

    pub fn get(&self, name: &str) -> Option<MetricSummary> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

fn summarize(vals: &[f64]) -> MetricSummary {
    if vals.is_empty() {
        return MetricSummary {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MetricSummary { mean, std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub missing_ratio: f64,
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatOutcome>,
    pub aggregate: Aggregate,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn reports(&self) -> Vec<MetricReport> {
        self.repeats.iter().filter_map(|r| r.report).collect()
    }
}

/// The data one repeat works on.
#[derive(Debug, Clone)]
pub struct RepeatSplit {
    /// Training samples with complete labels.
    pub train: Dataset,
    /// Training samples with simulated missing labels.
    pub masked_train: Dataset,
    pub test: Dataset,
}

/// Splits (seeded) and masks the training labels at `ratio`.
pub fn repeat_split(ds: &Dataset, cfg: &ExperimentConfig, ratio: f64, seed: u64) -> Result<RepeatSplit> {
    let (train_idx, test_idx) = split_samples(ds, cfg.train_fraction, derive_seed(seed, TAG_SPLIT, 0));
    let train = ds.subset(&train_idx)?;
    let test = ds.subset(&test_idx)?;
    let masked = simulate_missing(&train.complete_labels(), ratio, derive_seed(seed, TAG_MASK, 0))?;
    let mut masked_train = train.clone();
    masked_train.labels = masked.labels;
    masked_train.mask = masked.mask;
    masked_train.hidden_labels = Some(masked.hidden);
    Ok(RepeatSplit {
        train,
        masked_train,
        test,
    })
}

/// Trains ML-KNN on the selected features and scores it on the test split.
pub fn evaluate_selection(split: &RepeatSplit, cfg: &ExperimentConfig, selected: &[usize]) -> Result<MetricReport> {
    let train = match cfg.evaluator_labels {
        EvaluatorLabels::Full => &split.train,
        EvaluatorLabels::Masked => &split.masked_train,
    };
    let model = mlknn::mlknn_fit(train, selected, cfg.mlknn_k, cfg.mlknn_smoothing)?;
    let pred = mlknn::mlknn_predict(&model, split.test.features.values().view())?;
    let truth = split.test.complete_labels();
    Ok(metrics::evaluate(
        pred.binary.view(),
        pred.confidence.view(),
        truth.values().view(),
    )?)
}

fn one_repeat(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    ratio: f64,
    selector: &dyn FeatureSelector,
    seed: u64,
) -> Result<(MetricReport, Selection)> {
    let split = repeat_split(ds, cfg, ratio, seed)?;
    let count = Budget::Fraction(cfg.budget).resolve(ds.n_features())?;
    let selection = selector.select(&split.masked_train, count, derive_seed(seed, TAG_FIT, 0))?;
    let report = evaluate_selection(&split, cfg, &selection.selected)?;
    Ok((report, selection))
}

/// Runs `cfg.n_repeats` independent repeats at one missing ratio with any
/// selector. Repeats may run in parallel; results are ordered by repeat.
pub fn run_ratio_with(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    ratio: f64,
    selector: &dyn FeatureSelector,
    base_seed: u64,
) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let ds = prepare(ds, cfg)?;
    let repeats: Vec<RepeatOutcome> = (0..cfg.n_repeats)
        .into_par_iter()
        .map(|repeat| {
            let seed = derive_seed(base_seed, ratio.to_bits(), repeat as u64);
            match one_repeat(&ds, cfg, ratio, selector, seed) {
                Ok((report, selection)) => RepeatOutcome {
                    repeat,
                    seed,
                    report: Some(report),
                    error: None,
                    selection: Some(selection),
                },
                Err(e) => RepeatOutcome {
                    repeat,
                    seed,
                    report: None,
                    error: Some(e.to_string()),
                    selection: None,
                },
            }
        })
        .collect();
    let reports: Vec<MetricReport> = repeats.iter().filter_map(|r| r.report).collect();
    Ok(RunRecord {
        missing_ratio: ratio,
        config: cfg.clone(),
        aggregate: Aggregate::from_reports(&reports),
        repeats,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Validates and normalises the features as configured.
pub fn prepare(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = ds.clone().validated()?;
    ds.features = normalize_features(&ds.features, cfg.normalization);
    Ok(ds)
}

/// One ADSEL run per configured missing ratio.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_experiment_with(ds, cfg, &AdselSelector {
        hyperparams: cfg.hyperparams.clone(),
    })
}

pub fn run_experiment_with(ds: &Dataset, cfg: &ExperimentConfig, selector: &dyn FeatureSelector) -> Result<Vec<RunRecord>> {
    cfg.missing_ratios
        .iter()
        .map(|&ratio| run_ratio_with(ds, cfg, ratio, selector, cfg.hyperparams.seed))
        .collect()
}

/// The five weights of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTuple {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub delta: f64,
}

impl WeightTuple {
    pub fn of(hp: &Hyperparams) -> Self {
        Self {
            lambda: hp.lambda,
            alpha: hp.alpha,
            beta: hp.beta,
            mu: hp.mu,
            delta: hp.delta,
        }
    }

    pub fn apply(&self, base: &Hyperparams) -> Hyperparams {
        Hyperparams {
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            mu: self.mu,
            delta: self.delta,
            ..base.clone()
        }
    }

    fn as_array(&self) -> [f64; 5] {
        [self.lambda, self.alpha, self.beta, self.mu, self.delta]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub weights: WeightTuple,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Hyperparams,
    pub rows: Vec<GridRow>,
}

/// Cartesian product of the grid around `base`, in lexicographic order of
/// (lambda, alpha, beta, mu, delta).
pub fn grid_points(grid: &HyperGrid, base: &Hyperparams) -> Vec<WeightTuple> {
    let mut points = vec![WeightTuple::of(base)];
    for w in Weight::ALL {
        let mut vals = w.values(grid).to_vec();
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut hp = p.apply(&Hyperparams::default());
                    w.set(&mut hp, v);
                    WeightTuple::of(&hp)
                })
            })
            .collect();
    }
    points
}

/// Scores every grid point with `scorer` and returns the best one. Ties go
/// to the lexicographically smallest weight tuple; failed points score NaN
/// and never win.
pub fn grid_search_with<F>(cfg: &ExperimentConfig, scorer: F) -> Result<GridResult>
where
    F: Fn(&Hyperparams) -> Result<f64> + Sync,
{
    let points = grid_points(&cfg.hyper_grid, &cfg.hyperparams);
    let rows: Vec<GridRow> = points
        .into_par_iter()
        .map(|weights| {
            let score = scorer(&weights.apply(&cfg.hyperparams)).unwrap_or(f64::NAN);
            GridRow { weights, score }
        })
        .collect();
    let best = rows
        .iter()
        .filter(|r| r.score.is_finite())
        .fold(None::<&GridRow>, |best, r| match best {
            None => Some(r),
            Some(b) if r.score > b.score => Some(r),
            Some(b) if r.score == b.score && lex_less(&r.weights, &b.weights) => Some(r),
            keep => keep,
        })
        .ok_or_else(|| Error::Config("no grid point could be evaluated".into()))?;
    Ok(GridResult {
        best: best.weights.apply(&cfg.hyperparams),
        rows,
    })
}

fn lex_less(a: &WeightTuple, b: &WeightTuple) -> bool {
    a.as_array()
        .iter()
        .zip(b.as_array().iter())
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Grid search scored by mean validation AP over `cfg.grid_repeats`
/// repeats, averaged across `ratios`. Every point sees the same seeds.
pub fn grid_search(ds: &Dataset, cfg: &ExperimentConfig, ratios: &[f64]) -> Result<GridResult> {
    let inner = ExperimentConfig {
        n_repeats: cfg.grid_repeats.max(1),
        ..cfg.clone()
    };
    let base_seed = derive_seed(cfg.hyperparams.seed, TAG_GRID, 0);
    grid_search_with(cfg, |hp| {
        let selector = AdselSelector {
            hyperparams: hp.clone(),
        };
        let mut total = 0.0;
        for &ratio in ratios {
            let rec = run_ratio_with(ds, &inner, ratio, &selector, base_seed)?;
            total += rec
                .aggregate
                .get("average_precision")
                .map_or(f64::NAN, |s| s.mean);
        }
        Ok(total / ratios.len() as f64)
    })
}

/// Grid search followed by the full protocol at the chosen weights. One
/// search over all ratios, or one per ratio with `cfg.tune_per_ratio`.
pub fn run_tuned_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<(Vec<GridResult>, Vec<RunRecord>)> {
    cfg.validate()?;
    let ds = prepare(ds, cfg)?;
    let plain = ExperimentConfig {
        normalization: Normalization::None,
        ..cfg.clone()
    };
    let groups: Vec<Vec<f64>> = if cfg.tune_per_ratio {
        cfg.missing_ratios.iter().map(|&r| vec![r]).collect()
    } else {
        vec![cfg.missing_ratios.clone()]
    };
    let mut grids = Vec::new();
    let mut records = Vec::new();
    for ratios in groups {
        let grid = grid_search(&ds, &plain, &ratios)?;
        let tuned = ExperimentConfig {
            hyperparams: grid.best.clone(),
            ..plain.clone()
        };
        for &ratio in &ratios {
            let mut rec = run_ratio_with(
                &ds,
                &tuned,
                ratio,
                &AdselSelector {
                    hyperparams: grid.best.clone(),
                },
                tuned.hyperparams.seed,
            )?;
            rec.config.normalization = cfg.normalization;
            records.push(rec);
        }
        grids.push(grid);
    }
    Ok((grids, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: Weight,
    pub value: f64,
    pub hyperparams: Hyperparams,
    pub missing_ratio: f64,
    pub aggregate: Aggregate,
}

/// Varies one weight over its grid values with everything else at the
/// configured base, evaluated at the first configured missing ratio.
pub fn sensitivity_sweep(ds: &Dataset, cfg: &ExperimentConfig, parameter: Weight) -> Result<Vec<SweepRow>> {
    let ratio = *cfg
        .missing_ratios
        .first()
        .ok_or_else(|| Error::Config("no missing ratio configured".into()))?;
    let values = parameter.values(&cfg.hyper_grid);
    if values.is_empty() {
        return Err(Error::Config(format!("empty grid for {}", parameter.name())));
    }
    values
        .iter()
        .map(|&value| {
            let mut hp = cfg.hyperparams.clone();
            parameter.set(&mut hp, value);
            let rec = run_ratio_with(
                ds,
                cfg,
                ratio,
                &AdselSelector {
                    hyperparams: hp.clone(),
                },
                cfg.hyperparams.seed,
            )?;
            Ok(SweepRow {
                parameter,
                value,
                hyperparams: hp,
                missing_ratio: ratio,
                aggregate: rec.aggregate,
            })
        })
        .collect()
}

/// `ratio,metric,mean,std,n_repeats` rows, one per ratio and metric.
pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("ratio,metric,mean,std,n_repeats\n");
    for rec in records {
        for (name, s) in &rec.aggregate.metrics {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.missing_ratio, name, s.mean, s.std, rec.aggregate.n_ok
            ));
        }
    }
    out
}

/// Per-metric curve data: `ratio,mean,std`.
pub fn plot_csv(records: &[RunRecord], metric: &str) -> String {
    let mut out = String::from("ratio,mean,std\n");
    for rec in records {
        if let Some(s) = rec.aggregate.get(metric) {
            out.push_str(&format!("{},{},{}\n", rec.missing_ratio, s.mean, s.std));
        }
    }
    out
}

/// `parameter,value,metric,mean,std,n_repeats`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameter,value,metric,mean,std,n_repeats\n");
    for row in rows {
        for (name, s) in &row.aggregate.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.parameter.name(),
                row.value,
                name,
                s.mean,
                s.std,
                row.aggregate.n_ok
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn no_missing_keeps_everything() {
        let y = LabelMatrix::new(array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let m = simulate_missing(&y, 0.0, 3).unwrap();
        assert_eq!(m.labels, y);
        assert!(m.mask.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn half_missing_per_column() {
        let y = LabelMatrix::new(Array2::from_shape_fn((10, 3), |(i, j)| ((i + j) % 2) as f64));
        let m = simulate_missing(&y, 0.5, 9).unwrap();
        for col in m.mask.values().columns() {
            assert_eq!(col.iter().filter(|&&v| v == 0.0).count(), 5);
        }
        for ((i, j), &p) in m.mask.values().indexed_iter() {
            if p == 0.0 {
                assert_eq!(m.labels.values()[[i, j]], 0.0);
                assert_eq!(m.hidden.values()[[i, j]], y.values()[[i, j]]);
            } else {
                assert_eq!(m.labels.values()[[i, j]], y.values()[[i, j]]);
            }
        }
        assert_eq!(simulate_missing(&y, 0.5, 9).unwrap(), m);
        assert!(simulate_missing(&y, 1.0, 9).is_err());
    }

    #[test]
    fn binarize_is_inclusive() {
        let l = binarize_labels(&array![[5.0, 4.9, 0.0]], 5.0);
        assert_eq!(l.values(), &array![[1.0, 0.0, 0.0]]);
        assert!(binarize_labels(&Array2::zeros((3, 2)), 5.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_over_lambda_only() {
        let grid = HyperGrid {
            lambda: decade_grid(),
            alpha: vec![],
            beta: vec![],
            mu: vec![],
            delta: vec![],
        };
        let points = grid_points(&grid, &Hyperparams::default());
        assert_eq!(points.len(), 7);
        assert!(points.iter().all(|p| p.alpha == 1.0 && p.delta == 1.0));
    }

    #[test]
    fn injected_scorer_picks_its_favourite() {
        let cfg = ExperimentConfig {
            hyper_grid: HyperGrid {
                lambda: decade_grid(),
                alpha: vec![],
                beta: vec![],
                mu: vec![],
                delta: vec![],
            },
            ..Default::default()
        };
        let res = grid_search_with(&cfg, |hp| Ok(-(hp.lambda.log10() - 1.0).abs())).unwrap();
        assert_eq!(res.best.lambda, 10.0);
        assert_eq!(res.rows.len(), 7);
    }

    #[test]
    fn singleton_grid_and_ties() {
        let cfg = ExperimentConfig {
            hyper_grid: HyperGrid {
                lambda: vec![0.5],
                alpha: vec![],
                beta: vec![],
                mu: vec![],
                delta: vec![],
            },
            ..Default::default()
        };
        assert_eq!(grid_search_with(&cfg, |_| Ok(1.0)).unwrap().best.lambda, 0.5);

        let cfg = ExperimentConfig {
            hyper_grid: HyperGrid {
                lambda: vec![10.0, 1.0, 100.0],
                alpha: vec![],
                beta: vec![],
                mu: vec![],
                delta: vec![],
            },
            ..Default::default()
        };
        assert_eq!(grid_search_with(&cfg, |_| Ok(0.3)).unwrap().best.lambda, 1.0);
    }

    #[test]
    fn config_is_flat_json() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"lambda": 10, "sigma": "auto", "n_repeats": 2, "ablation": "no_gfrl"}"#)
                .unwrap();
        assert_eq!(cfg.hyperparams.lambda, 10.0);
        assert_eq!(cfg.n_repeats, 2);
        assert_eq!(cfg.hyperparams.ablation, crate::solver::Ablation::NoGfrl);
        assert_eq!(cfg.train_fraction, 0.7);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn seeds_differ_by_tag_and_index() {
        let a = derive_seed(1, 2, 3);
        assert_eq!(a, derive_seed(1, 2, 3));
        assert_ne!(a, derive_seed(1, 2, 4));
        assert_ne!(a, derive_seed(1, 3, 3));
    }
}
