//! Discrete AdaBoost with depth-1 decision trees.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_columns, check_labels, Scorer, TrainConfig, SCHEMA_VERSION};
use crate::error::Result;
use crate::features::FeatureMatrix;

/// Weighted errors closer than this are considered tied; the earlier candidate wins.
pub const ERROR_TIE_EPS: f64 = 1e-12;

/// Weighted error at or below this counts as a perfect split.
const ZERO_ERROR: f64 = 1e-12;

/// `h(x) = polarity` if `x[feature_index] > threshold`, else `-polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature_index: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub weight: f64,
}

impl Stump {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.vote(row[self.feature_index])
    }

    /// The stump's ±1 output for a value of its feature.
    pub fn vote(&self, value: f64) -> f64 {
        let p = f64::from(self.polarity);
        if value > self.threshold {
            p
        } else {
            -p
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    /// `ε_t` of the stump chosen this round.
    pub weighted_error: f64,
    /// 0/1 error of the ensemble after this round.
    pub training_error: f64,
    /// Mean exponential loss `(1/N) Σ exp(-y F(x))`, which bounds `training_error`.
    pub exp_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub schema_version: u32,
    pub column_names: Vec<String>,
    pub stumps: Vec<Stump>,
    pub rounds: Vec<RoundStats>,
}

impl AdaBoostModel {
    pub fn from_stumps(column_names: Vec<String>, stumps: Vec<Stump>) -> Self {
        Self { schema_version: SCHEMA_VERSION, column_names, stumps, rounds: Vec::new() }
    }

    /// Signed margin `Σ_t α_t h_t(row)`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.weight * s.predict(row)).sum()
    }
}

impl Scorer for AdaBoostModel {
    fn column_names(&self) -> &[String] {
        &self.column_names
    }

    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(&self.column_names, x)?;
        Ok(x.features
            .axis_iter(Axis(0))
            .map(|r| self.stumps.iter().map(|s| s.weight * s.vote(r[s.feature_index])).sum())
            .collect())
    }
}

/// Best unweighted stump `(feature, threshold, polarity)` and its weighted error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpChoice {
    pub feature_index: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub error: f64,
}

/// Column-wise row orderings, computed once per training run.
struct SortedColumns {
    order: Vec<Vec<usize>>,
}

impl SortedColumns {
    fn new(x: &Array2<f64>) -> Self {
        let order = x
            .axis_iter(Axis(1))
            .map(|col| {
                let mut idx: Vec<usize> = (0..col.len()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
                idx
            })
            .collect();
        Self { order }
    }
}

/// Exhaustive search over features, midpoints between consecutive distinct values,
/// and both polarities, visiting candidates in that order.
fn best_stump(x: &Array2<f64>, y: &[f64], w: &[f64], sorted: &SortedColumns) -> Option<StumpChoice> {
    let total_pos: f64 = y.iter().zip(w).filter(|(l, _)| **l > 0.0).map(|(_, w)| w).sum();
    let total_neg: f64 = y.iter().zip(w).filter(|(l, _)| **l < 0.0).map(|(_, w)| w).sum();
    let mut best: Option<StumpChoice> = None;
    for (j, order) in sorted.order.iter().enumerate() {
        let col = x.column(j);
        // weight of positives / negatives at or below the current threshold
        let (mut below_pos, mut below_neg) = (0.0, 0.0);
        for k in 0..order.len().saturating_sub(1) {
            let r = order[k];
            if y[r] > 0.0 {
                below_pos += w[r];
            } else {
                below_neg += w[r];
            }
            let (a, b) = (col[r], col[order[k + 1]]);
            if a == b {
                continue;
            }
            let threshold = (a + b) / 2.0;
            let err_up = below_pos + (total_neg - below_neg);
            let err_down = below_neg + (total_pos - below_pos);
            for (polarity, error) in [(1i8, err_up), (-1i8, err_down)] {
                if best.is_none_or(|b| error < b.error - ERROR_TIE_EPS) {
                    best = Some(StumpChoice { feature_index: j, threshold, polarity, error });
                }
            }
        }
    }
    best
}

/// Round weight `½ ln((1 - ε) / ε)`, with `ε` floored so a perfect stump stays finite.
pub fn round_weight(error: f64) -> f64 {
    let e = error.max(ZERO_ERROR);
    0.5 * ((1.0 - e) / e).ln()
}

/// Trains for up to `cfg.adaboost_rounds` rounds, halting early when no stump beats
/// chance or a stump separates the training set perfectly.
pub fn train_adaboost(x: &FeatureMatrix, cfg: &TrainConfig) -> Result<AdaBoostModel> {
    cfg.validate()?;
    let labels = check_labels(x)?;
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut margins = vec![0.0; n];
    let sorted = SortedColumns::new(&x.features);
    let mut model = AdaBoostModel::from_stumps(x.column_names.clone(), Vec::new());

    for _ in 0..cfg.adaboost_rounds {
        let Some(choice) = best_stump(&x.features, &y, &w, &sorted) else { break };
        if choice.error >= 0.5 {
            break;
        }
        let stump = Stump {
            feature_index: choice.feature_index,
            threshold: choice.threshold,
            polarity: choice.polarity,
            weight: round_weight(choice.error),
        };
        let mut z = 0.0;
        for (r, &value) in x.features.column(stump.feature_index).iter().enumerate() {
            let h = stump.vote(value);
            margins[r] += stump.weight * h;
            w[r] *= (-stump.weight * y[r] * h).exp();
            z += w[r];
        }
        w.iter_mut().for_each(|v| *v /= z);
        model.stumps.push(stump);

        let wrong = margins.iter().zip(&y).filter(|(m, l)| (**m > 0.0) != (**l > 0.0)).count();
        let exp_loss = margins.iter().zip(&y).map(|(m, l)| (-l * m).exp()).sum::<f64>() / n as f64;
        model.rounds.push(RoundStats {
            weighted_error: choice.error,
            training_error: wrong as f64 / n as f64,
            exp_loss,
        });
        if choice.error <= ZERO_ERROR {
            break;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querylog::EntityId;
    use ndarray::array;

    fn matrix(features: Array2<f64>, labels: Vec<bool>) -> FeatureMatrix {
        let entities = (0..features.nrows())
            .map(|i| EntityId::new(&format!("e{i:03}")).unwrap())
            .collect();
        let column_names = (0..features.ncols()).map(|j| format!("F1@{}", j + 1)).collect();
        FeatureMatrix { entities, features, column_names, labels: Some(labels) }
    }

    #[test]
    fn separable_data_halts_after_one_round() {
        let x = matrix(array![[0.1], [0.2], [0.3], [5.0], [6.0]], vec![false, false, false, true, true]);
        let m = train_adaboost(&x, &TrainConfig::default()).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.rounds[0].training_error, 0.0);
        assert_eq!(m.stumps[0].threshold, (0.3 + 5.0) / 2.0);
        assert_eq!(m.stumps[0].polarity, 1);
        assert!(m.stumps[0].weight.is_finite());
    }

    #[test]
    fn single_unit_stump_scores_are_signs() {
        let s = Stump { feature_index: 0, threshold: 0.5, polarity: -1, weight: 1.0 };
        let m = AdaBoostModel::from_stumps(vec!["F1@1".into()], vec![s]);
        let x = matrix(array![[0.0], [1.0], [0.5]], vec![true, false, true]);
        assert_eq!(m.score(&x).unwrap(), vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn rejects_degenerate_labels_and_column_mismatch() {
        let x = matrix(array![[0.0], [1.0]], vec![true, true]);
        assert!(matches!(
            train_adaboost(&x, &TrainConfig::default()),
            Err(crate::Error::DegenerateLabels)
        ));
        let m = AdaBoostModel::from_stumps(vec!["F7@2".into()], vec![]);
        assert!(m.score(&x).is_err());
    }

    #[test]
    fn exp_loss_decreases_every_round() {
        let x = matrix(
            array![[1.0, 3.0], [2.0, 1.0], [3.0, 4.0], [4.0, 1.5], [5.0, 9.0], [6.0, 2.0]],
            vec![true, false, false, true, false, true],
        );
        let m = train_adaboost(&x, &TrainConfig::default()).unwrap();
        assert!(m.rounds.len() > 1);
        for p in m.rounds.windows(2) {
            assert!(p[1].exp_loss < p[0].exp_loss);
        }
        for r in &m.rounds {
            assert!(r.training_error <= r.exp_loss + 1e-15);
        }
    }
}
