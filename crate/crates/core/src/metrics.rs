//! Instance-based multi-label metrics and the Friedman / Iman-Davenport test.
//!
//! Ranking metrics (ranking loss, coverage, average precision) only score
//! samples that have at least one relevant and one irrelevant label; the rest
//! are counted in `skipped_samples`. A label's rank is the number of labels
//! whose confidence is at least its own, so tied labels share the worse rank.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hamming_loss: f64,
    pub ranking_loss: f64,
    pub coverage: f64,
    pub average_precision: f64,
    pub skipped_samples: usize,
}

/// The four metrics by name, in report order.
pub const METRIC_NAMES: [&str; 4] = ["hamming_loss", "ranking_loss", "coverage", "average_precision"];

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "hamming_loss" => Some(self.hamming_loss),
            "ranking_loss" => Some(self.ranking_loss),
            "coverage" => Some(self.coverage),
            "average_precision" => Some(self.average_precision),
            _ => None,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [
            self.hamming_loss,
            self.ranking_loss,
            self.coverage,
            self.average_precision,
        ]
    }
}

/// Whether larger values of the named metric are better.
pub fn higher_is_better(name: &str) -> bool {
    name == "average_precision"
}

fn check_shapes(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<(), MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::Shape(a.dim(), b.dim()));
    }
    Ok(())
}

pub fn hamming_loss(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64, MetricError> {
    check_shapes(pred, truth)?;
    if pred.is_empty() {
        return Err(MetricError::Undefined("hamming loss"));
    }
    let wrong = pred.iter().zip(truth.iter()).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Confidences of one sample split by relevance, each sorted ascending.
struct Split {
    relevant: Vec<f64>,
    irrelevant: Vec<f64>,
    all: Vec<f64>,
}

fn split(conf: ArrayView1<f64>, truth: ArrayView1<f64>) -> Option<Split> {
    let mut relevant = Vec::new();
    let mut irrelevant = Vec::new();
    for (&c, &t) in conf.iter().zip(truth.iter()) {
        if t == 1.0 {
            relevant.push(c);
        } else {
            irrelevant.push(c);
        }
    }
    if relevant.is_empty() || irrelevant.is_empty() {
        return None;
    }
    relevant.sort_by(f64::total_cmp);
    irrelevant.sort_by(f64::total_cmp);
    let mut all = [relevant.as_slice(), irrelevant.as_slice()].concat();
    all.sort_by(f64::total_cmp);
    Some(Split {
        relevant,
        irrelevant,
        all,
    })
}

/// Number of entries of ascending `sorted` that are `>= c`.
fn at_least(sorted: &[f64], c: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v < c)
}

fn greater_than(sorted: &[f64], c: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= c)
}

fn per_sample<F>(
    conf: ArrayView2<f64>,
    truth: ArrayView2<f64>,
    name: &'static str,
    score: F,
) -> Result<(f64, usize), MetricError>
where
    F: Fn(&Split) -> f64,
{
    check_shapes(conf, truth)?;
    let (mut total, mut used) = (0.0, 0usize);
    for (c, t) in conf.rows().into_iter().zip(truth.rows()) {
        if let Some(s) = split(c, t) {
            total += score(&s);
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricError::Undefined(name));
    }
    Ok((total / used as f64, conf.nrows() - used))
}

/// Fraction of (relevant, irrelevant) pairs ordered wrongly; ties count 1/2.
pub fn ranking_loss(conf: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64, MetricError> {
    per_sample(conf, truth, "ranking loss", |s| {
        let bad: f64 = s
            .relevant
            .iter()
            .map(|&c| {
                let above = greater_than(&s.irrelevant, c);
                let tied = at_least(&s.irrelevant, c) - above;
                above as f64 + 0.5 * tied as f64
            })
            .sum();
        bad / (s.relevant.len() * s.irrelevant.len()) as f64
    })
    .map(|r| r.0)
}

/// Average depth (rank - 1) needed to cover every relevant label.
pub fn coverage(conf: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64, MetricError> {
    per_sample(conf, truth, "coverage", |s| {
        // the lowest-confidence relevant label has the largest rank
        (at_least(&s.all, s.relevant[0]) - 1) as f64
    })
    .map(|r| r.0)
}

pub fn average_precision(conf: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64, MetricError> {
    per_sample(conf, truth, "average precision", |s| {
        let sum: f64 = s
            .relevant
            .iter()
            .map(|&c| at_least(&s.relevant, c) as f64 / at_least(&s.all, c) as f64)
            .sum();
        sum / s.relevant.len() as f64
    })
    .map(|r| r.0)
}

/// Computes all four metrics. `binary` feeds hamming loss, `confidence` the
/// ranking metrics.
pub fn evaluate(
    binary: ArrayView2<f64>,
    confidence: ArrayView2<f64>,
    truth: ArrayView2<f64>,
) -> Result<MetricReport, MetricError> {
    check_shapes(confidence, truth)?;
    let skipped_samples = truth
        .rows()
        .into_iter()
        .filter(|t| t.iter().all(|&v| v == 1.0) || t.iter().all(|&v| v != 1.0))
        .count();
    Ok(MetricReport {
        hamming_loss: hamming_loss(binary, truth)?,
        ranking_loss: ranking_loss(confidence, truth)?,
        coverage: coverage(confidence, truth)?,
        average_precision: average_precision(confidence, truth)?,
        skipped_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    /// Mean rank of each method (1 = best).
    pub mean_ranks: Vec<f64>,
    pub chi_square: f64,
    /// Iman-Davenport statistic.
    pub f_f: f64,
    pub critical_value: f64,
    /// Whether equal performance is rejected (`f_f > critical_value`).
    pub reject: bool,
}

/// Ranks of `scores` with 1 for the best; tied scores share the average of
/// their positions.
pub fn average_ranks(scores: ArrayView1<f64>, higher_is_better: bool) -> Vec<f64> {
    let k = scores.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; k];
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Friedman test over a `methods x settings` score table.
pub fn friedman_test(
    table: ArrayView2<f64>,
    higher_is_better: bool,
    critical_value: f64,
) -> Result<FriedmanResult, MetricError> {
    let (k, n) = table.dim();
    if k < 2 || n < 2 {
        return Err(MetricError::FriedmanShape(k, n));
    }
    if let Some(((i, j), _)) = table.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(MetricError::FriedmanNonFinite(i, j));
    }
    let mut rank_sums = vec![0.0; k];
    for setting in table.columns() {
        for (sum, r) in rank_sums.iter_mut().zip(average_ranks(setting, higher_is_better)) {
            *sum += r;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / nf).collect();
    let sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let chi = (12.0 * nf / (kf * (kf + 1.0)) * (sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let denom = nf * (kf - 1.0) - chi;
    let f_f = if chi == 0.0 {
        0.0
    } else if denom <= 0.0 {
        // every setting ranks the methods identically
        f64::INFINITY
    } else {
        (nf - 1.0) * chi / denom
    };
    Ok(FriedmanResult {
        mean_ranks,
        chi_square: chi,
        f_f,
        critical_value,
        reject: f_f > critical_value,
    })
}

/// Convenience for building score tables row by row.
pub fn table_from_rows(rows: &[Vec<f64>]) -> Result<Array2<f64>, MetricError> {
    let k = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(MetricError::FriedmanShape(k, n));
    }
    Array2::from_shape_vec((k, n), rows.concat()).map_err(|_| MetricError::FriedmanShape(k, n))
}
