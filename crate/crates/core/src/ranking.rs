//! Feature ranking by the row norms of a fitted projection.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::SelectionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Feature indices, most important first.
    pub order: Vec<usize>,
    /// `|w_i|_2` for feature `i` (indexed by feature, not by rank).
    pub scores: Vec<f64>,
}

/// How many top-ranked features to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Share of all features in `(0, 1]`, rounded up.
    Fraction(f64),
    Count(usize),
}

impl Budget {
    pub fn resolve(&self, d: usize) -> Result<usize, SelectionError> {
        match *self {
            Budget::Fraction(f) if f > 0.0 && f <= 1.0 => {
                // absorb products like 0.1 * 30 = 3.0000000000000004
                let raw = f * d as f64;
                let count = (raw - 1e-9 * raw.max(1.0)).ceil() as usize;
                Ok(count.clamp(1, d))
            }
            Budget::Count(c) if c >= 1 && c <= d => Ok(c),
            other => Err(SelectionError::Budget(format!("{other:?}"), d)),
        }
    }
}

pub fn rank_features(w: ArrayView2<f64>) -> FeatureRanking {
    let scores: Vec<f64> = w.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index among ties
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    FeatureRanking { order, scores }
}

pub fn select_top(ranking: &FeatureRanking, budget: Budget) -> Result<Vec<usize>, SelectionError> {
    let count = budget.resolve(ranking.order.len())?;
    Ok(ranking.order[..count].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn single_nonzero_row_ranks_first() {
        let mut w = Array2::zeros((5, 2));
        w[[3, 0]] = 3.0;
        w[[3, 1]] = 4.0;
        let r = rank_features(w.view());
        assert_eq!(r.order[0], 3);
        assert_eq!(r.scores[3], 5.0);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let w = array![[0.0, 1.0], [1.0, 0.0], [0.0, 0.5]];
        assert_eq!(rank_features(w.view()).order, vec![0, 1, 2]);
    }

    #[test]
    fn fraction_budget() {
        let r = rank_features(Array2::<f64>::ones((100, 3)).view());
        assert_eq!(select_top(&r, Budget::Fraction(0.1)).unwrap().len(), 10);
        assert_eq!(select_top(&r, Budget::Fraction(1.0)).unwrap(), r.order);
        assert_eq!(Budget::Fraction(0.1).resolve(30).unwrap(), 3);
        assert_eq!(Budget::Fraction(0.1).resolve(31).unwrap(), 4);
        assert_eq!(Budget::Fraction(0.001).resolve(20).unwrap(), 1);
    }

    #[test]
    fn count_one_is_argmax() {
        let w = array![[0.1, 0.0], [0.0, -2.0], [1.0, 1.0]];
        let r = rank_features(w.view());
        assert_eq!(select_top(&r, Budget::Count(1)).unwrap(), vec![1]);
    }

    #[test]
    fn out_of_range_budgets() {
        let r = rank_features(Array2::<f64>::ones((4, 2)).view());
        assert!(select_top(&r, Budget::Count(0)).is_err());
        assert!(select_top(&r, Budget::Count(5)).is_err());
        assert!(select_top(&r, Budget::Fraction(0.0)).is_err());
        assert!(select_top(&r, Budget::Fraction(1.5)).is_err());
    }

    proptest! {
        #[test]
        fn order_matches_brute_force(cells in proptest::collection::vec(-3.0f64..3.0, 15)) {
            let w = Array2::from_shape_vec((5, 3), cells).unwrap();
            let r = rank_features(w.view());
            // selection sort over independently computed norms
            let norms: Vec<f64> = (0..5)
                .map(|i| (0..3).map(|j| w[[i, j]] * w[[i, j]]).sum::<f64>().sqrt())
                .collect();
            let mut remaining: Vec<usize> = (0..5).collect();
            let mut expected = Vec::new();
            while !remaining.is_empty() {
                let mut best = 0;
                for (pos, &i) in remaining.iter().enumerate() {
                    if norms[i] > norms[remaining[best]] {
                        best = pos;
                    }
                }
                expected.push(remaining.remove(best));
            }
            prop_assert_eq!(r.order, expected);
        }

        #[test]
        fn invariant_under_positive_scaling(
            cells in proptest::collection::vec(-3.0f64..3.0, 12),
            c in 0.01f64..100.0,
        ) {
            let w = Array2::from_shape_vec((4, 3), cells).unwrap();
            let scaled = &w * c;
            prop_assert_eq!(rank_features(w.view()).order, rank_features(scaled.view()).order);
        }
    }
}
