//! End-to-end pipeline: synthesize a query log, forecast trending entities with
//! every ranking method, boost each method's filtered top-k names inside the
//! language model and measure recognition of the test week's trending names.

mod config;
mod sweeps;

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train_adaboost, train_mlp, Model, Scorer};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureMatrix};
use crate::lm::{inject_entity_token, splice_entity_distribution, train, NGramLm, SentenceScorer, WeightedSentence};
use crate::querylog::{aggregate, generate_synthetic_log, label_trending, EntityId, FrequencyTable, TrendEvent};
use crate::ranking::{
    average_precision, heuristic_score, paired_t_test, precision_recall_at_k, EvalReport, Heuristic,
    KMetrics, Labels, RankedList,
};
use crate::recognizer::{
    decode, feedback_filter_with, generate_confusions, recognized_exactly, word_error_rate,
    DecodeConfig, HypothesisSet, Lexicon, WerReport,
};
use crate::text::{self, WordPool};

pub use config::{ExperimentConfig, LmSettings};
pub use sweeps::{
    sweep_history, sweep_individual_features, FeatureRow, FeatureSweep, HistoryPoint, HistorySweep,
};

/// Stream offset for the general-sentence generator, keeping it apart from other seeds.
const GENERAL_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Adaboost,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Adaboost, ModelKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Adaboost => "adaboost",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn train(self, x: &FeatureMatrix, cfg: &crate::classifiers::TrainConfig) -> Result<Model> {
        Ok(match self {
            ModelKind::Adaboost => Model::Adaboost(train_adaboost(x, cfg)?),
            ModelKind::Mlp => Model::Mlp(train_mlp(x, cfg)?),
        })
    }
}

/// Ranks the rows of `x` by a trained model's scores.
pub fn model_ranking<S: Scorer + ?Sized>(model: &S, x: &FeatureMatrix) -> Result<RankedList> {
    let scores = model.score(x)?;
    RankedList::from_scores(x.entities.iter().cloned().zip(scores))
}

/// Entity sentences with weights proportional to their query counts in windows
/// `1..before` and summing to `entity_weight`, followed by unit-weight filler sentences.
pub fn lm_corpus(
    table: &FrequencyTable,
    before: usize,
    entity_weight: f64,
    general: &[Vec<String>],
) -> Vec<WeightedSentence> {
    let mut counts: BTreeMap<&EntityId, u64> = BTreeMap::new();
    for i in 1..before.min(table.n_windows() + 1) {
        for (e, &c) in table.window(i) {
            *counts.entry(e).or_default() += c;
        }
    }
    let total: u64 = counts.values().sum();
    let scale = if total == 0 { 0.0 } else { entity_weight / total as f64 };
    let mut corpus: Vec<WeightedSentence> = counts
        .into_iter()
        .map(|(e, c)| WeightedSentence::new(e.words(), c as f64 * scale))
        .collect();
    corpus.extend(general.iter().map(|s| WeightedSentence::new(s.iter().cloned(), 1.0)));
    corpus
}

/// Filler sentences over the name vocabulary: `(training, held_out)`.
pub fn general_corpus(cfg: &ExperimentConfig, pool: &WordPool) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ GENERAL_STREAM);
    let mut sentences = text::general_sentences(
        pool,
        cfg.lm.general_sentences + cfg.lm.heldout_sentences,
        &mut rng,
    );
    let heldout = sentences.split_off(cfg.lm.general_sentences);
    (sentences, heldout)
}

/// Base language model with the entity class token injected.
pub fn base_lm(cfg: &ExperimentConfig, table: &FrequencyTable, general: &[Vec<String>]) -> Result<NGramLm> {
    let corpus = lm_corpus(table, cfg.test_target_window, cfg.lm.entity_weight, general);
    train(&inject_entity_token(corpus, cfg.lm.alpha)?, cfg.lm.order)
}

/// Scores rankings against fixed labels and fixed test utterances under one base
/// language model.
pub struct Evaluator {
    pub lm: NGramLm,
    pub lexicon: Lexicon,
    pub labels: Labels,
    pub decode: DecodeConfig,
    /// Cut whose p-value is reported at the top level of an [`EvalReport`].
    pub primary_k: usize,
    pub utterances: Vec<HypothesisSet>,
    /// Held-out non-entity sentences.
    pub general: Vec<HypothesisSet>,
    pub baseline: WerReport,
    pub general_baseline: WerReport,
    recognized: HashMap<EntityId, bool>,
}

impl Evaluator {
    /// Synthesizes hypothesis sets for `references` and `general` and decodes
    /// them without boosting.
    pub fn new(
        lm: NGramLm,
        labels: Labels,
        references: &[Vec<String>],
        general: &[Vec<String>],
        decode: DecodeConfig,
        primary_k: usize,
    ) -> Result<Self> {
        decode.validate()?;
        if references.is_empty() || general.is_empty() {
            return Err(Error::InvalidInput("evaluation needs test and held-out utterances".into()));
        }
        let lexicon = Lexicon::from_lm(&lm);
        let synth = |sets: &[Vec<String>]| {
            sets.iter()
                .map(|s| generate_confusions(s, &lexicon, &decode))
                .collect::<Result<Vec<_>>>()
        };
        let utterances = synth(references)?;
        let general = synth(general)?;
        let empty = WerReport { wer: 0.0, per_utterance: vec![] };
        let mut ev = Self {
            lm,
            lexicon,
            labels,
            decode,
            primary_k,
            utterances,
            general,
            baseline: empty.clone(),
            general_baseline: empty,
            recognized: HashMap::new(),
        };
        ev.baseline = ev.decode_all(&ev.utterances, &ev.lm)?;
        ev.general_baseline = ev.decode_all(&ev.general, &ev.lm)?;
        Ok(ev)
    }

    pub fn decode_all<L: SentenceScorer + ?Sized>(&self, sets: &[HypothesisSet], lm: &L) -> Result<WerReport> {
        let pairs: Vec<(Vec<String>, Vec<String>)> = sets
            .iter()
            .map(|h| (h.reference.clone(), decode(h, lm, &self.decode).words.clone()))
            .collect();
        word_error_rate(&pairs)
    }

    /// Whether the unboosted system decodes `e` exactly; memoized across rankings.
    pub fn is_recognized(&mut self, e: &EntityId) -> Result<bool> {
        if let Some(&r) = self.recognized.get(e) {
            return Ok(r);
        }
        let r = recognized_exactly(e, &self.lm, &self.lexicon, &self.decode)?;
        self.recognized.insert(e.clone(), r);
        Ok(r)
    }

    /// The feedback-filtered boost list for `ranked` with budget `k`.
    pub fn boost_list(&mut self, ranked: &RankedList, k: usize) -> Result<Vec<EntityId>> {
        feedback_filter_with(ranked, k, |e| self.is_recognized(e))
    }

    /// Ranking metrics plus boosted recognition at every cut in `ks`.
    pub fn evaluate(&mut self, ranked: &RankedList, ks: &[usize]) -> Result<EvalReport> {
        let ap = average_precision(ranked, &self.labels)?;
        let max_k = ks.iter().copied().max().unwrap_or(0);
        let boost_list = self.boost_list(ranked, max_k)?;
        let base_rates = self.baseline.utterance_rates();
        let mut per_k = BTreeMap::new();
        for &k in ks {
            let (precision, recall) = precision_recall_at_k(ranked, &self.labels, k)?;
            let names: Vec<&str> = boost_list.iter().take(k).map(EntityId::as_str).collect();
            let m = if names.is_empty() {
                KMetrics {
                    precision,
                    recall,
                    wer: self.baseline.wer,
                    p_value: None,
                    boosted: 0,
                    general_wer: self.general_baseline.wer,
                }
            } else {
                let boosted = splice_entity_distribution(&self.lm, &names)?;
                let report = self.decode_all(&self.utterances, &boosted)?;
                let general = self.decode_all(&self.general, &boosted)?;
                KMetrics {
                    precision,
                    recall,
                    wer: report.wer,
                    p_value: Some(paired_t_test(&report.utterance_rates(), &base_rates)?),
                    boosted: boosted.k(),
                    general_wer: general.wer,
                }
            };
            per_k.insert(k, m);
        }
        let p_value = per_k.get(&self.primary_k).and_then(|m| m.p_value);
        Ok(EvalReport { ap, per_k, p_value })
    }
}

/// Everything shared by all methods of one configuration: the frequency table
/// and an evaluator over the test window.
pub struct World {
    pub cfg: ExperimentConfig,
    pub table: FrequencyTable,
    pub trends: Vec<TrendEvent>,
    pub eval: Evaluator,
}

impl World {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let log = generate_synthetic_log(&cfg.synth)?;
        let table = aggregate(&log.records, &log.window, cfg.synth.sample_threshold)?;
        let (general, heldout) = general_corpus(cfg, &log.pool);
        let lm = base_lm(cfg, &table, &general)?;
        let labels: Labels = label_trending(&table, cfg.test_target_window, cfg.c)?.into_iter().collect();
        let references = positive_names(&labels);
        if references.is_empty() {
            return Err(Error::NoPositives);
        }
        let eval = Evaluator::new(lm, labels, &references, &heldout, cfg.decode.clone(), cfg.primary_k)?;
        Ok(Self { cfg: cfg.clone(), table, trends: log.trends, eval })
    }

    /// Windows `target - weeks ..= target`, re-indexed from 1.
    pub fn history_slice(&self, target: usize, weeks: usize) -> Result<FrequencyTable> {
        if weeks == 0 || weeks >= target {
            return Err(Error::Config(format!(
                "{weeks} feature weeks do not fit before window {target}"
            )));
        }
        self.table.slice(target - weeks, target)
    }

    /// Labeled training rows at the train target and unlabeled test rows at the
    /// test target, both with `weeks` feature windows.
    pub fn matrices(&self, weeks: usize) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let n = weeks + 1;
        let train_slice = self.history_slice(self.cfg.train_target_window, weeks)?;
        let test_slice = self.history_slice(self.cfg.test_target_window, weeks)?;
        Ok((
            build_feature_matrix(&train_slice, n, &self.cfg.features, Some(self.cfg.c))?,
            build_feature_matrix(&test_slice, n, &self.cfg.features, None)?,
        ))
    }

    pub fn heuristic_ranking(&self, h: Heuristic, weeks: usize) -> Result<RankedList> {
        let slice = self.history_slice(self.cfg.test_target_window, weeks)?;
        heuristic_score(h, &slice, weeks + 1, self.cfg.seed, &self.cfg.features)
    }

    pub fn evaluate(&mut self, ranked: &RankedList, ks: &[usize]) -> Result<EvalReport> {
        self.eval.evaluate(ranked, ks)
    }
}

/// Word sequences of the positively labeled entities, in entity order.
pub fn positive_names(labels: &Labels) -> Vec<Vec<String>> {
    let mut positives: Vec<&EntityId> = labels.iter().filter(|(_, &t)| t).map(|(e, _)| e).collect();
    positives.sort_unstable();
    positives
        .into_iter()
        .map(|e| e.words().map(str::to_string).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub wer: f64,
    pub general_wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// Size of the evaluation universe (entities seen before the test window).
    pub candidates: usize,
    pub positives: usize,
    pub train_rows: usize,
    pub train_positives: usize,
    /// Unboosted recognition, shared by every method.
    pub baseline: BaselineReport,
    pub methods: BTreeMap<String, EvalReport>,
}

/// Wall-clock seconds per pipeline stage.
pub type Timings = BTreeMap<String, f64>;

pub struct RunOutcome {
    pub report: RunReport,
    pub timings: Timings,
    pub rankings: BTreeMap<String, RankedList>,
    pub models: BTreeMap<String, Model>,
}

/// Runs every ranking method over one world.
pub fn run_with_world(world: &mut World) -> Result<RunOutcome> {
    let cfg = world.cfg.clone();
    cfg.validate_for_run()?;
    let mut timings = Timings::new();
    let mut rankings = BTreeMap::new();
    let mut models = BTreeMap::new();

    let clock = Instant::now();
    let (train_x, test_x) = world.matrices(cfg.feature_weeks)?;
    timings.insert("featurize".into(), clock.elapsed().as_secs_f64());

    for kind in ModelKind::ALL {
        let clock = Instant::now();
        let model = kind.train(&train_x, &cfg.train)?;
        rankings.insert(kind.name().to_string(), model_ranking(&model, &test_x)?);
        models.insert(kind.name().to_string(), model);
        timings.insert(format!("train_{}", kind.name()), clock.elapsed().as_secs_f64());
    }
    for h in Heuristic::ALL {
        rankings.insert(h.name().to_string(), world.heuristic_ranking(h, cfg.feature_weeks)?);
    }

    let mut methods = BTreeMap::new();
    for (name, ranked) in &rankings {
        let clock = Instant::now();
        methods.insert(name.clone(), world.evaluate(ranked, &cfg.k_cuts)?);
        timings.insert(format!("evaluate_{name}"), clock.elapsed().as_secs_f64());
    }

    let report = RunReport {
        config: cfg,
        candidates: world.eval.labels.len(),
        positives: world.eval.utterances.len(),
        train_rows: train_x.n_rows(),
        train_positives: train_x.positive_count(),
        baseline: BaselineReport {
            wer: world.eval.baseline.wer,
            general_wer: world.eval.general_baseline.wer,
        },
        methods,
    };
    Ok(RunOutcome { report, timings, rankings, models })
}

/// Builds the world for `cfg` and runs every method.
pub fn run_end_to_end(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate_for_run()?;
    let clock = Instant::now();
    let mut world = World::build(cfg)?;
    let build = clock.elapsed().as_secs_f64();
    let mut outcome = run_with_world(&mut world)?;
    outcome.timings.insert("build_world".into(), build);
    Ok(outcome)
}
