//! Query logs: synthesis, windowed aggregation, candidate sets and trending labels.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::text::{self, WordPool};

/// Seconds in one week, the default window length.
pub const WEEK_SECS: u64 = 604_800;

/// Case-folds and collapses whitespace in an entity name.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A normalized entity name. Equal strings are equal ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(Arc<str>);

impl EntityId {
    pub fn new(raw: &str) -> Result<Self> {
        let norm = normalize_name(raw);
        if norm.is_empty() {
            return Err(Error::InvalidInput("entity name is empty".into()));
        }
        Ok(Self(Arc::from(norm)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ')
    }
}

impl Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        EntityId::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// Deduplicates entity-name allocations so equal names share one buffer.
#[derive(Debug, Default)]
pub struct Interner {
    ids: HashSet<EntityId>,
}

impl Interner {
    pub fn intern(&mut self, raw: &str) -> Result<EntityId> {
        let norm = normalize_name(raw);
        if let Some(id) = self.ids.get(norm.as_str()) {
            return Ok(id.clone());
        }
        let id = EntityId::new(&norm)?;
        self.ids.insert(id.clone());
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// One log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub ts: u64,
    pub entity: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub start: u64,
    pub window_len: u64,
    pub n_windows: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { start: 0, window_len: WEEK_SECS, n_windows: 8 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::Config("window_len must be positive".into()));
        }
        if self.n_windows < 2 {
            return Err(Error::Config("n_windows must be at least 2".into()));
        }
        Ok(())
    }

    /// `t_i` for 1-based window `i`; `bound(n + 1)` is the end of the last window.
    pub fn bound(&self, i: usize) -> u64 {
        self.start + (i as u64 - 1) * self.window_len
    }

    /// 1-based window containing `ts`, if any.
    pub fn window_of(&self, ts: u64) -> Option<usize> {
        if ts < self.start {
            return None;
        }
        let i = ((ts - self.start) / self.window_len) as usize + 1;
        (i <= self.n_windows).then_some(i)
    }
}

/// Per-window entity counts `f(T_i, e)`; zero counts are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    config: WindowConfig,
    windows: Vec<BTreeMap<EntityId, u64>>,
    totals: Vec<u64>,
}

impl FrequencyTable {
    /// Builds a table from `(window, entity, count)` triples, summing duplicates and
    /// dropping any cell whose final count is below `sample_threshold`.
    pub fn from_counts<I>(config: WindowConfig, entries: I, sample_threshold: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, EntityId, u64)>,
    {
        config.validate()?;
        let mut windows = vec![BTreeMap::new(); config.n_windows];
        for (i, e, c) in entries {
            check_window(i, 1, config.n_windows)?;
            *windows[i - 1].entry(e).or_insert(0) += c;
        }
        for w in &mut windows {
            w.retain(|_, c| *c > 0 && *c >= sample_threshold);
        }
        let totals = windows.iter().map(|w| w.values().sum()).collect();
        Ok(Self { config, windows, totals })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn n_windows(&self) -> usize {
        self.config.n_windows
    }

    /// `f(T_i, e)`, zero when absent.
    pub fn count(&self, i: usize, e: &EntityId) -> u64 {
        self.windows[i - 1].get(e).copied().unwrap_or(0)
    }

    /// `Σ_k f(T_i, e_k)` over retained cells.
    pub fn total(&self, i: usize) -> u64 {
        self.totals[i - 1]
    }

    pub fn window(&self, i: usize) -> &BTreeMap<EntityId, u64> {
        &self.windows[i - 1]
    }

    /// Sum of all stored counts.
    pub fn grand_total(&self) -> u64 {
        self.totals.iter().sum()
    }

    /// Every entity with a stored count in some window.
    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.windows.iter().flat_map(|w| w.keys().cloned()).collect()
    }

    /// Windows `first..=last` re-indexed from 1.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        check_window(first, 1, self.n_windows())?;
        check_window(last, first, self.n_windows())?;
        let config = WindowConfig {
            start: self.config.bound(first),
            window_len: self.config.window_len,
            n_windows: last - first + 1,
        };
        if config.n_windows < 2 {
            return Err(Error::InvalidInput("a slice needs at least two windows".into()));
        }
        Ok(Self {
            config,
            windows: self.windows[first - 1..last].to_vec(),
            totals: self.totals[first - 1..last].to_vec(),
        })
    }

    /// CSV with header `window,entity,count`, rows ordered by window then entity.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window", "entity", "count"])?;
        for (i, win) in self.windows.iter().enumerate() {
            for (e, c) in win {
                w.write_record([(i + 1).to_string(), e.to_string(), c.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R, config: WindowConfig) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            window: usize,
            entity: String,
            count: u64,
        }
        let mut interner = Interner::default();
        let mut entries = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: Row = row?;
            entries.push((row.window, interner.intern(&row.entity)?, row.count));
        }
        Self::from_counts(config, entries, 0)
    }
}

fn check_window(index: usize, low: usize, high: usize) -> Result<()> {
    if index < low || index > high {
        return Err(Error::WindowOutOfRange { index, low, high });
    }
    Ok(())
}

/// Counts records per window, dropping those outside the configured span and then any
/// `(window, entity)` cell below `sample_threshold`.
pub fn aggregate(
    records: &[QueryRecord],
    cfg: &WindowConfig,
    sample_threshold: u64,
) -> Result<FrequencyTable> {
    cfg.validate()?;
    let entries = records
        .iter()
        .filter_map(|r| cfg.window_of(r.ts).map(|i| (i, r.entity.clone(), 1)));
    FrequencyTable::from_counts(*cfg, entries, sample_threshold)
}

/// Entities with a retained count in any of windows `1..n-1`.
pub fn candidate_set(table: &FrequencyTable, n: usize) -> Result<BTreeSet<EntityId>> {
    check_window(n, 2, table.n_windows())?;
    Ok((1..n)
        .flat_map(|i| table.window(i).keys().cloned())
        .collect())
}

/// The trending inequality `f(T_n) ≥ c · f(T_{n-1})`, requiring the entity to be
/// queried in `T_n` at all.
pub fn is_trending(prev: u64, cur: u64, c: f64) -> bool {
    cur > 0 && cur as f64 >= c * prev as f64
}

/// Trending label for every candidate of `n`.
pub fn label_trending(table: &FrequencyTable, n: usize, c: f64) -> Result<BTreeMap<EntityId, bool>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("trend factor c must be positive, got {c}")));
    }
    let candidates = candidate_set(table, n)?;
    Ok(candidates
        .into_iter()
        .map(|e| {
            let t = is_trending(table.count(n - 1, &e), table.count(n, &e), c);
            (e, t)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub n_windows: usize,
    pub zipf_exponent: f64,
    /// Expected total queries per window before trend multipliers.
    pub base_volume: f64,
    pub trend_fraction: f64,
    pub trend_multiplier_range: [f64; 2],
    pub sample_threshold: u64,
    pub seed: u64,
    #[serde(default)]
    pub start: u64,
    #[serde(default = "default_window_len")]
    pub window_len: u64,
    /// Size of the pseudo-word pool entity names are drawn from.
    #[serde(default = "default_vocab_size")]
    pub vocab_size: usize,
}

fn default_window_len() -> u64 {
    WEEK_SECS
}

fn default_vocab_size() -> usize {
    3000
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_entities: 20_000,
            n_windows: 8,
            zipf_exponent: 1.0,
            base_volume: 1_000_000.0,
            trend_fraction: 0.05,
            trend_multiplier_range: [3.0, 10.0],
            sample_threshold: 3,
            seed: 7,
            start: 0,
            window_len: WEEK_SECS,
            vocab_size: default_vocab_size(),
        }
    }
}

impl SynthConfig {
    pub fn window_config(&self) -> WindowConfig {
        WindowConfig { start: self.start, window_len: self.window_len, n_windows: self.n_windows }
    }

    pub fn validate(&self) -> Result<()> {
        self.window_config().validate()?;
        if self.n_entities == 0 {
            return Err(Error::Config("entity universe is empty".into()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be positive".into()));
        }
        if !(self.zipf_exponent > 0.0) {
            return Err(Error::Config("zipf_exponent must be positive".into()));
        }
        if !(self.base_volume > 0.0) || !self.base_volume.is_finite() {
            return Err(Error::Config("base_volume must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.trend_fraction) {
            return Err(Error::Config("trend_fraction must lie in [0, 1)".into()));
        }
        let [lo, hi] = self.trend_multiplier_range;
        if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::Config(format!("bad trend_multiplier_range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Ground truth for one injected trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendEvent {
    pub entity: EntityId,
    pub onset_window: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticLog {
    pub records: Vec<QueryRecord>,
    pub trends: Vec<TrendEvent>,
    pub window: WindowConfig,
    /// The whole entity universe, including entities that were never sampled.
    pub entities: Vec<EntityId>,
    /// Word pool the entity names were drawn from.
    pub pool: WordPool,
}

/// Seeded Zipf + Poisson query log with injected step-change trends.
pub fn generate_synthetic_log(cfg: &SynthConfig) -> Result<SyntheticLog> {
    cfg.validate()?;
    let window = cfg.window_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let pool = WordPool::generate(cfg.vocab_size, &mut rng);
    let entities: Vec<EntityId> = text::entity_names(&pool, cfg.n_entities, &mut rng)
        .iter()
        .map(|n| EntityId::new(n))
        .collect::<Result<_>>()?;

    // popularity rank r (1-based) of entity j is ranks[j]
    let ranks = index::sample(&mut rng, cfg.n_entities, cfg.n_entities).into_vec();
    let harmonic: f64 = (1..=cfg.n_entities)
        .map(|r| (r as f64).powf(-cfg.zipf_exponent))
        .sum();
    let base_rates: Vec<f64> = ranks
        .iter()
        .map(|&r| cfg.base_volume * ((r + 1) as f64).powf(-cfg.zipf_exponent) / harmonic)
        .collect();

    let n_trends = (cfg.trend_fraction * cfg.n_entities as f64).round() as usize;
    let mut onset: Vec<Option<(usize, f64)>> = vec![None; cfg.n_entities];
    let mut trend_idx = index::sample(&mut rng, cfg.n_entities, n_trends).into_vec();
    trend_idx.sort_unstable();
    let [lo, hi] = cfg.trend_multiplier_range;
    let mut trends = Vec::with_capacity(n_trends);
    for j in trend_idx {
        let w = rng.random_range(2..=cfg.n_windows);
        let m = if hi > lo { rng.random_range(lo..hi) } else { lo };
        onset[j] = Some((w, m));
        trends.push(TrendEvent { entity: entities[j].clone(), onset_window: w, multiplier: m });
    }

    let mut records = Vec::new();
    for i in 1..=cfg.n_windows {
        let (t0, t1) = (window.bound(i), window.bound(i + 1));
        for (j, e) in entities.iter().enumerate() {
            let mut rate = base_rates[j];
            if let Some((w, m)) = onset[j] {
                if i >= w {
                    rate *= m;
                }
            }
            let count = Poisson::new(rate)
                .map_err(|e| Error::Config(format!("poisson rate {rate}: {e}")))?
                .sample(&mut rng) as u64;
            for _ in 0..count {
                records.push(QueryRecord { ts: rng.random_range(t0..t1), entity: e.clone() });
            }
        }
    }
    records.sort_unstable_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.entity.cmp(&b.entity)));

    Ok(SyntheticLog { records, trends, window, entities, pool })
}

/// Writes values as JSON Lines.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads JSON Lines, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?,
        );
    }
    Ok(out)
}

/// Reads a query log, sharing one allocation per distinct entity name.
pub fn read_query_log<R: BufRead>(input: R) -> Result<Vec<QueryRecord>> {
    #[derive(Deserialize)]
    struct Line {
        ts: u64,
        entity: String,
    }
    let mut interner = Interner::default();
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
        out.push(QueryRecord { ts: l.ts, entity: interner.intern(&l.entity)? });
    }
    Ok(out)
}
