//! Ranked entity lists, heuristic baselines and evaluation metrics.

mod heuristics;
mod metrics;
mod significance;

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::querylog::{EntityId, Interner};

pub use heuristics::{heuristic_score, Heuristic};
pub use metrics::{average_precision, precision_recall_at_k, EvalReport, KMetrics, Labels};
pub use significance::paired_t_test;

/// Entities in descending score order, ties broken by ascending entity id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<(EntityId, f64)>,
}

fn rank_order(a: &(EntityId, f64), b: &(EntityId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl RankedList {
    pub fn from_scores<I>(scored: I) -> Result<Self>
    where
        I: IntoIterator<Item = (EntityId, f64)>,
    {
        let mut entries: Vec<(EntityId, f64)> = scored.into_iter().collect();
        if let Some((e, _)) = entries.iter().find(|(_, s)| s.is_nan()) {
            return Err(Error::InvalidInput(format!("NaN score for {e}")));
        }
        entries.sort_by(rank_order);
        if entries.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidInput("duplicate entity in ranking".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(EntityId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.entries.iter().map(|(e, _)| e)
    }

    /// CSV `rank,entity,score` with 1-based ranks.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "entity", "score"])?;
        for (r, (e, s)) in self.entries.iter().enumerate() {
            w.write_record([(r + 1).to_string(), e.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            #[allow(dead_code)]
            rank: usize,
            entity: String,
            score: f64,
        }
        let mut interner = Interner::default();
        let mut entries = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: Row = row?;
            entries.push((interner.intern(&row.entity)?, row.score));
        }
        Self::from_scores(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    #[test]
    fn ties_break_lexicographically() {
        let r = RankedList::from_scores([(e("b"), 1.0), (e("a"), 1.0), (e("c"), 2.0)]).unwrap();
        let order: Vec<_> = r.entities().map(|e| e.as_str()).collect();
        assert_eq!(order, ["c", "a", "b"]);
    }

    #[test]
    fn rejects_nan_and_duplicates() {
        assert!(RankedList::from_scores([(e("a"), f64::NAN)]).is_err());
        assert!(RankedList::from_scores([(e("a"), 1.0), (e("a"), 2.0)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = RankedList::from_scores([(e("x y"), 0.25), (e("z"), -3.0)]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("rank,entity,score\n1,x y,0.25\n"));
        assert_eq!(RankedList::read_csv(&buf[..]).unwrap(), r);
    }
}
