//! Time-series features over a [`FrequencyTable`].
//!
//! Seven features are defined per entity `e` and window `i`, with `f` the window
//! count and `P(e|T_i) = f(T_i, e) / Σ_k f(T_i, e_k)`:
//!
//! | id | expression |
//! |----|------------|
//! | F1 | `P(e|T_i)` |
//! | F2 | `P(e|T_i) - P(e|T_{i-1})` |
//! | F3 | `log P(e|T_i) - log P(e|T_{i-1})` |
//! | F4 | `(f(T_i) - f(T_{i-1})) / f(T_{i-1})` |
//! | F5 | `(log f(T_i) - log f(T_{i-1})) / log f(T_{i-1})` |
//! | F6 | `P(e|T_i) · (1 - P(e|T_{i-1}))` |
//! | F7 | `f(T_i) / f(T_{i-1})` |
//!
//! Two conventions keep values finite. `log(0)` is defined as the *value*
//! `log_zero` (1e-6 by default), not `ln(1e-6)`. Every feature is clipped to at
//! most `clip_max` (1e3); `x/0` for `x > 0` becomes `+inf` and so clips to `clip_max`,
//! while `0/0` is defined as 0.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::querylog::{self, EntityId, FrequencyTable, Interner};

pub const N_FEATURES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub log_zero: f64,
    pub clip_max: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { log_zero: 1e-6, clip_max: 1e3 }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.log_zero > 0.0) || !(self.clip_max > 0.0) {
            return Err(Error::Config("log_zero and clip_max must be positive".into()));
        }
        Ok(())
    }
}

/// Natural log, except that `log(0)` is the literal value `params.log_zero`.
pub fn safe_log(x: f64, params: &FeatureParams) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::InvalidInput(format!("log of negative value {x}")));
    }
    Ok(if x == 0.0 { params.log_zero } else { x.ln() })
}

/// Upper clip; NaN becomes 0.
pub fn clip_feature(x: f64, params: &FeatureParams) -> f64 {
    if x.is_nan() {
        0.0
    } else if x == f64::NEG_INFINITY {
        // unreachable for count data: every denominator is non-negative
        -params.clip_max
    } else {
        x.min(params.clip_max)
    }
}

fn rel_freq(table: &FrequencyTable, i: usize, e: &EntityId) -> f64 {
    match table.total(i) {
        0 => 0.0,
        total => table.count(i, e) as f64 / total as f64,
    }
}

/// Feature `m` (1..=7) of entity `e` at window `i`.
pub fn feature_value(
    m: usize,
    table: &FrequencyTable,
    i: usize,
    e: &EntityId,
    params: &FeatureParams,
) -> Result<f64> {
    if !(1..=N_FEATURES).contains(&m) {
        return Err(Error::InvalidInput(format!("feature index {m} not in 1..=7")));
    }
    let low = if m == 1 { 1 } else { 2 };
    if i < low || i > table.n_windows() {
        return Err(Error::WindowOutOfRange { index: i, low, high: table.n_windows() });
    }
    let p_cur = rel_freq(table, i, e);
    let f_cur = table.count(i, e) as f64;
    let raw = if m == 1 {
        p_cur
    } else {
        let p_prev = rel_freq(table, i - 1, e);
        let f_prev = table.count(i - 1, e) as f64;
        match m {
            2 => p_cur - p_prev,
            3 => safe_log(p_cur, params)? - safe_log(p_prev, params)?,
            4 => (f_cur - f_prev) / f_prev,
            5 => {
                let lp = safe_log(f_prev, params)?;
                (safe_log(f_cur, params)? - lp) / lp
            }
            6 => p_cur * (1.0 - p_prev),
            _ => f_cur / f_prev,
        }
    };
    Ok(clip_feature(raw, params))
}

/// Column descriptors for a table whose label window is `n`:
/// `F1@1..F1@(n-1)`, then `F2@i..F7@i` for each `i` in `2..n-1`.
pub fn column_names(n: usize) -> Vec<String> {
    column_specs(n).into_iter().map(|(m, i)| format!("F{m}@{i}")).collect()
}

fn column_specs(n: usize) -> Vec<(usize, usize)> {
    let mut cols: Vec<(usize, usize)> = (1..n).map(|i| (1, i)).collect();
    for i in 2..n {
        for m in 2..=N_FEATURES {
            cols.push((m, i));
        }
    }
    cols
}

/// `(n-1) + (n-2)·6` for `n-1` feature windows.
pub fn feature_count(feature_windows: usize) -> usize {
    feature_windows + feature_windows.saturating_sub(1) * 6
}

/// Parses a `F{m}@{i}` descriptor.
pub fn parse_column(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('F')?;
    let (m, i) = rest.split_once('@')?;
    Some((m.parse().ok()?, i.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub entities: Vec<EntityId>,
    pub features: Array2<f64>,
    pub column_names: Vec<String>,
    pub labels: Option<Vec<bool>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.ncols()
    }

    /// Labels, or an error if the matrix is unlabeled.
    pub fn require_labels(&self) -> Result<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("feature matrix has no labels".into()))
    }

    /// Indices of the columns belonging to feature family `m`.
    pub fn family_columns(&self, m: usize) -> Vec<usize> {
        self.column_names
            .iter()
            .enumerate()
            .filter(|(_, c)| parse_column(c).is_some_and(|(fm, _)| fm == m))
            .map(|(j, _)| j)
            .collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            entities: self.entities.clone(),
            features: self.features.select(Axis(1), cols).as_standard_layout().into_owned(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn positive_count(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|&&b| b).count())
    }

    /// CSV with header `entity,<column_names...>,label`; the label cell is empty
    /// when the matrix is unlabeled.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["entity".to_string()];
        header.extend(self.column_names.iter().cloned());
        header.push("label".into());
        w.write_record(&header)?;
        for (r, e) in self.entities.iter().enumerate() {
            let mut row = vec![e.to_string()];
            row.extend(self.features.row(r).iter().map(|v| v.to_string()));
            row.push(match &self.labels {
                Some(l) => (l[r] as u8).to_string(),
                None => String::new(),
            });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "entity" || &header[header.len() - 1] != "label" {
            return Err(Error::Parse { line: 1, msg: "expected entity,...,label header".into() });
        }
        let column_names: Vec<String> =
            header.iter().skip(1).take(header.len() - 2).map(String::from).collect();
        let width = column_names.len();
        let mut interner = Interner::default();
        let (mut entities, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| Error::Parse { line: n + 2, msg };
            entities.push(interner.intern(&rec[0])?);
            for v in rec.iter().skip(1).take(width) {
                values.push(v.parse::<f64>().map_err(|e| bad(e.to_string()))?);
            }
            labels.push(match &rec[width + 1] {
                "" => None,
                "1" => Some(true),
                "0" => Some(false),
                other => return Err(bad(format!("bad label {other:?}"))),
            });
        }
        let labels = if labels.iter().all(Option::is_some) && !labels.is_empty() {
            Some(labels.into_iter().map(Option::unwrap).collect())
        } else {
            None
        };
        let features = Array2::from_shape_vec((entities.len(), width), values)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(Self { entities, features, column_names, labels })
    }
}

/// Feature matrix over `candidate_set(table, n)` in lexicographic entity order, with
/// trending labels when `label_factor` is given.
pub fn build_feature_matrix(
    table: &FrequencyTable,
    n: usize,
    params: &FeatureParams,
    label_factor: Option<f64>,
) -> Result<FeatureMatrix> {
    params.validate()?;
    let entities: Vec<EntityId> = querylog::candidate_set(table, n)?.into_iter().collect();
    let specs = column_specs(n);
    let mut features = Array2::zeros((entities.len(), specs.len()));
    for (r, e) in entities.iter().enumerate() {
        for (j, &(m, i)) in specs.iter().enumerate() {
            features[[r, j]] = feature_value(m, table, i, e, params)?;
        }
    }
    let labels = match label_factor {
        Some(c) => {
            let l: BTreeMap<EntityId, bool> = querylog::label_trending(table, n, c)?;
            Some(entities.iter().map(|e| l[e]).collect())
        }
        None => None,
    };
    Ok(FeatureMatrix { entities, features, column_names: column_names(n), labels })
}

/// Per-column z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    /// Population mean and standard deviation per column; constant columns get unit scale.
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Array1<f64> = x.sum_axis(Axis(0)) / n;
        let std = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &mu)| {
                let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Self { mean: mean.to_vec(), std }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - mu) / sd);
        }
        out
    }
}
