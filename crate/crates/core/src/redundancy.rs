//! Pairwise feature redundancy: squared cosine similarity between centred
//! feature rows.

use ndarray::{Array1, Array2, ArrayView2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyMatrix {
    pub values: Array2<f64>,
    /// Features whose centred norm is zero; their rows and columns are 0.
    pub constant_features: Vec<bool>,
}

/// Builds `A` from a `d x n` feature matrix.
pub fn build_redundancy(x: ArrayView2<f64>) -> RedundancyMatrix {
    let d = x.nrows();
    let mean = x.mean_axis(Axis(1)).unwrap_or_else(|| Array1::zeros(d));
    let centred = &x - &mean.insert_axis(Axis(1));
    let norms: Vec<f64> = centred
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let constant_features: Vec<bool> = norms.iter().map(|&nrm| nrm <= 1e-12 * scale).collect();

    let gram = centred.dot(&centred.t());
    let mut values = Array2::zeros((d, d));
    for i in 0..d {
        if constant_features[i] {
            continue;
        }
        values[[i, i]] = 1.0;
        for j in (i + 1)..d {
            if constant_features[j] {
                continue;
            }
            let cos = gram[[i, j]] / (norms[i] * norms[j]);
            let a = (cos * cos).min(1.0);
            values[[i, j]] = a;
            values[[j, i]] = a;
        }
    }
    RedundancyMatrix {
        values,
        constant_features,
    }
}
