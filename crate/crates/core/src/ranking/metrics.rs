use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::RankedList;
use crate::error::{Error, Result};
use crate::querylog::EntityId;

/// Ground-truth relevance over an evaluation universe.
pub type Labels = HashMap<EntityId, bool>;

fn positives(labels: &Labels) -> Result<usize> {
    match labels.values().filter(|&&b| b).count() {
        0 => Err(Error::NoPositives),
        n => Ok(n),
    }
}

fn label_of(labels: &Labels, e: &EntityId) -> Result<bool> {
    labels
        .get(e)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("no label for ranked entity {e}")))
}

/// Mean of precision@r over the ranks r of relevant items; relevant items missing
/// from the ranking contribute zero.
pub fn average_precision(ranked: &RankedList, labels: &Labels) -> Result<f64> {
    let n_pos = positives(labels)?;
    let (mut hits, mut sum) = (0usize, 0.0);
    for (r, e) in ranked.entities().enumerate() {
        if label_of(labels, e)? {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// `(precision@k, recall@k)`; precision divides by `min(k, |ranked|)`.
pub fn precision_recall_at_k(ranked: &RankedList, labels: &Labels, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let n_pos = positives(labels)?;
    let cut = k.min(ranked.len());
    let mut hits = 0usize;
    for e in ranked.entities().take(cut) {
        hits += usize::from(label_of(labels, e)?);
    }
    let precision = if cut == 0 { 0.0 } else { hits as f64 / cut as f64 };
    Ok((precision, hits as f64 / n_pos as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Corpus-level WER with the top-k filtered names boosted.
    pub wer: f64,
    /// Two-tailed paired t-test against the unboosted system.
    pub p_value: Option<f64>,
    /// Names actually boosted after the feedback filter.
    pub boosted: usize,
    /// WER on held-out non-entity sentences under the same boost.
    pub general_wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap: f64,
    pub per_k: BTreeMap<usize, KMetrics>,
    /// p-value at the primary cut-off.
    pub p_value: Option<f64>,
}
