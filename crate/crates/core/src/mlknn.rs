//! ML-KNN: Bayesian multi-label k-nearest-neighbour classifier with Laplace
//! smoothing.
//!
//! For each label `j` the model keeps a prior `P(H_j)` and, for every
//! neighbour count `c` in `0..=k`, the likelihoods `P(C_j = c | H_j)` and
//! `P(C_j = c | !H_j)` estimated by leave-one-out neighbour counting on the
//! training set.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::data::Dataset;
use crate::error::MlknnError;

pub const DEFAULT_NEIGHBOURS: usize = 10;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MlKnnModel {
    pub k_neighbors: usize,
    pub smoothing: f64,
    /// `P(H_j)` per label.
    pub priors: Vec<f64>,
    /// `cond_pos[j][c] = P(C_j = c | H_j)`.
    pub cond_pos: Vec<Vec<f64>>,
    /// `cond_neg[j][c] = P(C_j = c | !H_j)`.
    pub cond_neg: Vec<Vec<f64>>,
    /// Selected features of the training samples, one row per sample.
    pub train_features: Array2<f64>,
    pub train_labels: Array2<f64>,
    /// Feature indices (rows of the original feature matrix) the model uses.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// `n_test x k` in {0, 1}.
    pub binary: Array2<f64>,
    /// Posterior probability of relevance, `n_test x k`.
    pub confidence: Array2<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` training rows nearest to `point`, skipping `exclude`.
/// Distance ties go to the lower index.
fn neighbours(train: ArrayView2<f64>, point: ArrayView1<f64>, k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = train
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (sq_dist(r, point), i))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, i)| i).collect()
}

fn label_counts(labels: ArrayView2<f64>, nbrs: &[usize]) -> Vec<usize> {
    (0..labels.ncols())
        .map(|j| nbrs.iter().filter(|&&i| labels[[i, j]] == 1.0).count())
        .collect()
}

/// Trains on the labels stored in `train` using only the `selected` feature
/// rows.
pub fn mlknn_fit(train: &Dataset, selected: &[usize], k: usize, smoothing: f64) -> Result<MlKnnModel, MlknnError> {
    let d = train.n_features();
    if let Some(&index) = selected.iter().find(|&&i| i >= d) {
        return Err(MlknnError::FeatureIndex { index, d });
    }
    let features = train
        .features
        .values()
        .select(Axis(0), selected)
        .t()
        .to_owned();
    fit_arrays(features, train.labels.values().clone(), selected.to_vec(), k, smoothing)
}

/// Trains from sample-major features (`n x f`) and labels (`n x k`).
pub fn fit_arrays(
    features: Array2<f64>,
    labels: Array2<f64>,
    selected: Vec<usize>,
    k: usize,
    smoothing: f64,
) -> Result<MlKnnModel, MlknnError> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(MlknnError::NeighbourCount { k, n });
    }
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(MlknnError::Smoothing(smoothing));
    }
    let n_labels = labels.ncols();
    let s = smoothing;

    let priors = (0..n_labels)
        .map(|j| {
            let pos = labels.column(j).iter().filter(|&&v| v == 1.0).count() as f64;
            (s + pos) / (2.0 * s + n as f64)
        })
        .collect();

    // counts_pos[j][c]: training samples with label j whose neighbourhood
    // holds c positives for j
    let mut counts_pos = vec![vec![0usize; k + 1]; n_labels];
    let mut counts_neg = vec![vec![0usize; k + 1]; n_labels];
    for i in 0..n {
        let nbrs = neighbours(features.view(), features.row(i), k, Some(i));
        for (j, c) in label_counts(labels.view(), &nbrs).into_iter().enumerate() {
            if labels[[i, j]] == 1.0 {
                counts_pos[j][c] += 1;
            } else {
                counts_neg[j][c] += 1;
            }
        }
    }
    let smooth = |counts: &Vec<usize>| -> Vec<f64> {
        let total: usize = counts.iter().sum();
        let denom = s * (k + 1) as f64 + total as f64;
        counts.iter().map(|&c| (s + c as f64) / denom).collect()
    };
    Ok(MlKnnModel {
        k_neighbors: k,
        smoothing,
        priors,
        cond_pos: counts_pos.iter().map(smooth).collect(),
        cond_neg: counts_neg.iter().map(smooth).collect(),
        train_features: features,
        train_labels: labels,
        selected,
    })
}

impl MlKnnModel {
    /// Predicts for sample-major test features (`n_test x f`).
    pub fn predict_arrays(&self, test: ArrayView2<f64>) -> Result<PredictionResult, MlknnError> {
        let expected = self.train_features.ncols();
        if test.ncols() != expected {
            return Err(MlknnError::DimensionMismatch {
                expected,
                found: test.ncols(),
            });
        }
        let n_labels = self.priors.len();
        let mut binary = Array2::zeros((test.nrows(), n_labels));
        let mut confidence = Array2::zeros((test.nrows(), n_labels));
        for (t, point) in test.rows().into_iter().enumerate() {
            let nbrs = neighbours(self.train_features.view(), point, self.k_neighbors, None);
            for (j, c) in label_counts(self.train_labels.view(), &nbrs).into_iter().enumerate() {
                let pos = self.priors[j] * self.cond_pos[j][c];
                let neg = (1.0 - self.priors[j]) * self.cond_neg[j][c];
                binary[[t, j]] = if pos >= neg { 1.0 } else { 0.0 };
                confidence[[t, j]] = pos / (pos + neg);
            }
        }
        Ok(PredictionResult { binary, confidence })
    }
}

/// Predicts from a feature-major test matrix (`d x n_test`, all features);
/// the model's selected rows are picked out first.
pub fn mlknn_predict(model: &MlKnnModel, test_features: ArrayView2<f64>) -> Result<PredictionResult, MlknnError> {
    let d = test_features.nrows();
    if let Some(&index) = model.selected.iter().find(|&&i| i >= d) {
        return Err(MlknnError::FeatureIndex { index, d });
    }
    let test = test_features.select(Axis(0), &model.selected);
    model.predict_arrays(test.t())
}
