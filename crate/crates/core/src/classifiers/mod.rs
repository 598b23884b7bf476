//! Supervised trending classifiers: discrete AdaBoost over decision stumps and a
//! two-hidden-layer ReLU network trained with Adam.

pub mod adaboost;
pub mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use adaboost::{train_adaboost, AdaBoostModel, RoundStats, Stump};
pub use mlp::{train_mlp, MlpModel, Network};

/// Version stamped into serialized models.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adaboost_rounds: usize,
    pub adam_alpha: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub convergence_rel_tol: f64,
    pub max_epochs: usize,
    pub hidden_units: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adaboost_rounds: 50,
            adam_alpha: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 256,
            convergence_rel_tol: 1e-5,
            max_epochs: 500,
            hidden_units: 128,
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.adam_alpha, self.adam_eps, self.convergence_rel_tol];
        if pos.iter().any(|v| !(*v > 0.0))
            || self.adaboost_rounds == 0
            || self.batch_size == 0
            || self.max_epochs == 0
            || self.hidden_units == 0
        {
            return Err(Error::Config("training hyperparameters must be positive".into()));
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("Adam beta {b} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Anything that turns a feature matrix into one trending score per row.
pub trait Scorer {
    fn column_names(&self) -> &[String];

    /// Higher means more likely to trend.
    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>>;
}

/// A serialized model of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Adaboost(AdaBoostModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(text)?;
        let v = match &m {
            Model::Adaboost(a) => a.schema_version,
            Model::Mlp(n) => n.schema_version,
        };
        if v != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model schema version {v}")));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl Scorer for Model {
    fn column_names(&self) -> &[String] {
        match self {
            Model::Adaboost(m) => m.column_names(),
            Model::Mlp(m) => m.column_names(),
        }
    }

    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Model::Adaboost(m) => m.score(x),
            Model::Mlp(m) => m.score(x),
        }
    }
}

pub(crate) fn check_labels(x: &FeatureMatrix) -> Result<&[bool]> {
    let labels = x.require_labels()?;
    let pos = labels.iter().filter(|&&b| b).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(labels)
}

pub(crate) fn check_columns(expected: &[String], x: &FeatureMatrix) -> Result<()> {
    if expected != x.column_names.as_slice() {
        return Err(Error::ColumnMismatch {
            expected: expected.to_vec(),
            found: x.column_names.clone(),
        });
    }
    Ok(())
}
