use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{model_ranking, ModelKind, World};
use crate::error::{Error, Result};
use crate::ranking::{average_precision, Heuristic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub weeks: usize,
    pub model: ModelKind,
    pub columns: usize,
    pub ap: f64,
    /// WER at the primary cut.
    pub wer: f64,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySweep {
    pub k: usize,
    pub baseline_wer: f64,
    pub points: Vec<HistoryPoint>,
}

impl HistorySweep {
    pub fn point(&self, model: ModelKind, weeks: usize) -> Option<&HistoryPoint> {
        self.points.iter().find(|p| p.model == model && p.weeks == weeks)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["weeks", "model", "columns", "ap", "wer", "baseline_wer", "p_value"])?;
        for p in &self.points {
            w.write_record([
                p.weeks.to_string(),
                p.model.name().to_string(),
                p.columns.to_string(),
                p.ap.to_string(),
                p.wer.to_string(),
                self.baseline_wer.to_string(),
                p.p_value.map_or(String::new(), |v| v.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Retrains both models with each amount of feature history and evaluates them
/// at the primary cut.
pub fn sweep_history(world: &mut World, weeks: RangeInclusive<usize>) -> Result<HistorySweep> {
    let max = world.cfg.train_target_window - 1;
    if weeks.is_empty() || *weeks.start() == 0 || *weeks.end() > max {
        return Err(Error::Config(format!(
            "history range {weeks:?} must lie within [1, {max}]"
        )));
    }
    let k = world.cfg.primary_k;
    let train_cfg = world.cfg.train.clone();
    let mut points = Vec::new();
    for w in weeks {
        let (train_x, test_x) = world.matrices(w)?;
        for model in ModelKind::ALL {
            let ranked = model_ranking(&model.train(&train_x, &train_cfg)?, &test_x)?;
            let eval = world.evaluate(&ranked, &[k])?;
            points.push(HistoryPoint {
                weeks: w,
                model,
                columns: train_x.n_cols(),
                ap: eval.ap,
                wer: eval.per_k[&k].wer,
                p_value: eval.per_k[&k].p_value,
            });
        }
    }
    Ok(HistorySweep { k, baseline_wer: world.eval.baseline.wer, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub model: ModelKind,
    /// Feature family, `F1` to `F7`.
    pub feature: String,
    pub columns: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSweep {
    pub feature_weeks: usize,
    pub rows: Vec<FeatureRow>,
    /// AP of each model trained on every column.
    pub all_features: BTreeMap<ModelKind, f64>,
    /// AP of the raw ranking heuristics, keyed by name.
    pub heuristics: BTreeMap<String, f64>,
}

impl FeatureSweep {
    pub fn ap(&self, model: ModelKind, feature: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.model == model && r.feature == feature).map(|r| r.ap)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "feature", "columns", "ap", "all_features_ap"])?;
        for r in &self.rows {
            w.write_record([
                r.model.name().to_string(),
                r.feature.clone(),
                r.columns.to_string(),
                r.ap.to_string(),
                self.all_features[&r.model].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains both models on each feature family alone, next to the all-feature models
/// and the heuristic rankings.
pub fn sweep_individual_features(world: &mut World) -> Result<FeatureSweep> {
    let weeks = world.cfg.feature_weeks;
    if weeks < 3 {
        return Err(Error::Config(format!(
            "per-feature sweep needs feature_weeks >= 3, got {weeks}"
        )));
    }
    let train_cfg = world.cfg.train.clone();
    let (train_x, test_x) = world.matrices(weeks)?;
    let mut all_features = BTreeMap::new();
    let mut rows = Vec::new();
    for model in ModelKind::ALL {
        let ranked = model_ranking(&model.train(&train_x, &train_cfg)?, &test_x)?;
        all_features.insert(model, average_precision(&ranked, &world.eval.labels)?);
        for m in 1..=7 {
            let cols = train_x.family_columns(m);
            let (tr, te) = (train_x.select_columns(&cols), test_x.select_columns(&cols));
            let ranked = model_ranking(&model.train(&tr, &train_cfg)?, &te)?;
            rows.push(FeatureRow {
                model,
                feature: format!("F{m}"),
                columns: cols.len(),
                ap: average_precision(&ranked, &world.eval.labels)?,
            });
        }
    }
    let mut heuristics = BTreeMap::new();
    for h in Heuristic::ALL {
        let ranked = world.heuristic_ranking(h, weeks)?;
        heuristics.insert(h.name().to_string(), average_precision(&ranked, &world.eval.labels)?);
    }
    Ok(FeatureSweep { feature_weeks: weeks, rows, all_features, heuristics })
}
