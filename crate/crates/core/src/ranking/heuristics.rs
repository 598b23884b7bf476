use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RankedList;
use crate::error::{Error, Result};
use crate::features::{feature_value, FeatureParams};
use crate::querylog::{candidate_set, FrequencyTable};

/// Naive scoring baselines over the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Random,
    /// F1 at the last feature window.
    PopularLastWeek,
    /// F6 at the last feature window.
    SuddenlyPopular,
    /// F7 at the last feature window.
    TrendingLastWeek,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::Random,
        Heuristic::PopularLastWeek,
        Heuristic::SuddenlyPopular,
        Heuristic::TrendingLastWeek,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Random => "random",
            Heuristic::PopularLastWeek => "popular_last_week",
            Heuristic::SuddenlyPopular => "suddenly_popular",
            Heuristic::TrendingLastWeek => "trending_last_week",
        }
    }

    fn feature(self) -> Option<usize> {
        match self {
            Heuristic::Random => None,
            Heuristic::PopularLastWeek => Some(1),
            Heuristic::SuddenlyPopular => Some(6),
            Heuristic::TrendingLastWeek => Some(7),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::UnknownHeuristic(s.to_string()))
    }
}

/// Ranks `candidate_set(table, n)` by the heuristic evaluated at window `n - 1`.
/// F6 and F7 need `n ≥ 3`.
pub fn heuristic_score(
    heuristic: Heuristic,
    table: &FrequencyTable,
    n: usize,
    seed: u64,
    params: &FeatureParams,
) -> Result<RankedList> {
    let candidates = candidate_set(table, n)?;
    let last = n - 1;
    let scored: Vec<_> = match heuristic.feature() {
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            candidates.into_iter().map(|e| (e, rng.random::<f64>())).collect()
        }
        Some(m) => candidates
            .into_iter()
            .map(|e| feature_value(m, table, last, &e, params).map(|v| (e, v)))
            .collect::<Result<_>>()?,
    };
    RankedList::from_scores(scored)
}
