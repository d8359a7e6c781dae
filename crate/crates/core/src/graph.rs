//! q-nearest-neighbour heat-kernel affinity graph over samples and its
//! Laplacian.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::GraphError;

/// Heat-kernel bandwidth.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum Sigma {
    /// Mean Euclidean distance over the retained neighbour pairs.
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => s.serialize_str("auto"),
            Sigma::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct SigmaVisitor;
        impl Visitor<'_> for SigmaVisitor {
            type Value = Sigma;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"auto\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Sigma, E> {
                match v {
                    "auto" => Ok(Sigma::Auto),
                    other => other
                        .parse()
                        .map(Sigma::Fixed)
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Sigma, E> {
                Ok(Sigma::Fixed(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Sigma, E> {
                Ok(Sigma::Fixed(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Sigma, E> {
                Ok(Sigma::Fixed(v as f64))
            }
        }
        d.deserialize_any(SigmaVisitor)
    }
}

impl std::str::FromStr for Sigma {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            Ok(Sigma::Auto)
        } else {
            s.parse().map(Sigma::Fixed).map_err(|_| format!("bad sigma {s:?}"))
        }
    }
}

/// Symmetric sample affinity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    pub weights: Array2<f64>,
    pub sigma: f64,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    pub laplacian: Array2<f64>,
    pub degrees: Vec<f64>,
}

/// Squared Euclidean distances between the columns of `x`.
pub fn pairwise_sq_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.ncols();
    let mut dist = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = x
                .column(i)
                .iter()
                .zip(x.column(j).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    dist
}

/// Indices of the `q` nearest other samples of each sample. Ties go to the
/// lower index.
pub fn nearest_neighbours(sq_dist: &Array2<f64>, q: usize) -> Vec<Vec<usize>> {
    let n = sq_dist.nrows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| sq_dist[[i, a]].total_cmp(&sq_dist[[i, b]]).then(a.cmp(&b)));
            others.truncate(q);
            others
        })
        .collect()
}

/// Builds the heat-kernel graph over the sample columns of `x` (`d x n`).
///
/// Samples `i` and `j` are linked when either is among the other's `q`
/// nearest neighbours; the link weight is `exp(-|x_i - x_j|^2 / sigma^2)`.
pub fn build_affinity(x: ArrayView2<f64>, q: usize, sigma: Sigma) -> Result<AffinityGraph, GraphError> {
    let n = x.ncols();
    if q == 0 || q >= n {
        return Err(GraphError::NeighbourCount { q, n });
    }
    let sq = pairwise_sq_distances(x);
    let knn = nearest_neighbours(&sq, q);

    let mut linked = Array2::from_elem((n, n), false);
    for (i, nbrs) in knn.iter().enumerate() {
        for &j in nbrs {
            linked[[i, j]] = true;
            linked[[j, i]] = true;
        }
    }

    let sigma = match sigma {
        Sigma::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Sigma::Fixed(s) => return Err(GraphError::Bandwidth(s)),
        Sigma::Auto => {
            let (mut total, mut count) = (0.0, 0usize);
            for i in 0..n {
                for j in (i + 1)..n {
                    if linked[[i, j]] {
                        total += sq[[i, j]].sqrt();
                        count += 1;
                    }
                }
            }
            let mean = total / count as f64;
            // every linked pair is a duplicate
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };

    let denom = sigma * sigma;
    let mut weights = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if linked[[i, j]] {
                let w = (-sq[[i, j]] / denom).exp();
                weights[[i, j]] = w;
                weights[[j, i]] = w;
            }
        }
    }
    Ok(AffinityGraph { weights, sigma, q })
}

/// `L = G - S` with `G` the diagonal degree matrix.
pub fn build_laplacian(graph: &AffinityGraph) -> GraphLaplacian {
    laplacian_of(&graph.weights)
}

pub fn laplacian_of(weights: &Array2<f64>) -> GraphLaplacian {
    let degrees: Vec<f64> = weights.rows().into_iter().map(|r| r.sum()).collect();
    let mut laplacian = -weights.clone();
    for (i, g) in degrees.iter().enumerate() {
        laplacian[[i, i]] += g;
    }
    GraphLaplacian { laplacian, degrees }
}
