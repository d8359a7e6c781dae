//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;
pub mod solver_checks;

use adsel::{Dataset, FeatureMatrix, LabelMatrix};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random::<f64>())
}

/// Random binary matrix where every row has at least one 1 and one 0.
pub fn mixed_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Array2<f64> {
    let mut y = Array2::zeros((n, k));
    for mut row in y.rows_mut() {
        loop {
            row.mapv_inplace(|_| if rng.random::<bool>() { 1.0 } else { 0.0 });
            let s = row.sum();
            if s > 0.0 && s < k as f64 {
                break;
            }
        }
    }
    y
}

/// Linear-threshold labels from Gaussian features: `Y = 1[X'B > 0]`.
pub fn linear_dataset(seed: u64, d: usize, n: usize, k: usize) -> Dataset {
    let mut r = rng(seed);
    let x = gaussian(&mut r, (d, n));
    let b = gaussian(&mut r, (d, k));
    let y = x.t().dot(&b).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    Dataset::new(FeatureMatrix::new(x, None).unwrap(), LabelMatrix::new(y), None).unwrap()
}

/// Planted problem: `informative` features drive a 3-dimensional label
/// matrix through a nonnegative dimension-mixing matrix; the remaining
/// features are pure noise. Returns the dataset and the informative indices.
pub fn planted_dataset(seed: u64, n: usize, informative: usize, noise: usize) -> (Dataset, Vec<usize>) {
    let mut r = rng(seed);
    let d = informative + noise;
    let signal = gaussian(&mut r, (informative, n));
    let loadings = gaussian(&mut r, (informative, 3));
    let mixing = ndarray::array![[1.0, 0.4, 0.0], [0.0, 1.0, 0.4], [0.4, 0.0, 1.0]];
    let latent = signal.t().dot(&loadings).dot(&mixing);
    let y = latent.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });

    let mut rows = ndarray::concatenate(Axis(0), &[signal.view(), gaussian(&mut r, (noise, n)).view()]).unwrap();
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut r);
    rows = rows.select(Axis(0), &perm);
    // perm[new] = old; informative rows had old index < informative
    let mut planted: Vec<usize> = (0..d).filter(|&i| perm[i] < informative).collect();
    planted.sort_unstable();
    let ds = Dataset::new(FeatureMatrix::new(rows, None).unwrap(), LabelMatrix::new(y), None).unwrap();
    (ds, planted)
}

/// Writes features (samples as rows) and labels as headed CSV files and
/// returns their paths.
pub fn write_csv_pair(dir: &std::path::Path, ds: &Dataset) -> (std::path::PathBuf, std::path::PathBuf) {
    let header = |prefix: &str, m: usize| -> Vec<String> { (0..m).map(|j| format!("{prefix}{j}")).collect() };
    let x = dir.join("features.csv");
    let y = dir.join("labels.csv");
    let xs = ds.features.values().t().to_owned();
    std::fs::write(&x, adsel::data::format_csv_matrix(&xs, Some(&header("f", ds.n_features())))).unwrap();
    std::fs::write(&y, adsel::data::format_csv_matrix(ds.labels.values(), Some(&header("l", ds.n_labels())))).unwrap();
    (x, y)
}
