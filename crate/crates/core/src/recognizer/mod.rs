//! Simulated recognition of spoken entity names.
//!
//! Each utterance is represented by a set of confusable hypotheses produced by a
//! seeded character-edit channel; the acoustic score of a hypothesis is its
//! negated, scaled edit distance to the true name. Decoding picks the candidate
//! with the best acoustic plus weighted language-model score.

mod lexicon;

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{NGramLm, SentenceScorer};
use crate::querylog::{normalize_name, EntityId};
use crate::ranking::RankedList;

pub use lexicon::{char_distance, edit_distance, Lexicon, SNAP_RADIUS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub lm_weight: f64,
    /// Confusions generated per utterance, besides the reference.
    pub confusion_count: usize,
    /// Acoustic penalty per character edit.
    pub confusion_strength: f64,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self { lm_weight: 1.0, confusion_count: 9, confusion_strength: 0.2, seed: 29 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lm_weight > 0.0) || !self.lm_weight.is_finite() {
            return Err(Error::Config("lm_weight must be positive".into()));
        }
        if self.confusion_count == 0 {
            return Err(Error::Config("confusion_count must be positive".into()));
        }
        if !(self.confusion_strength > 0.0) || !self.confusion_strength.is_finite() {
            return Err(Error::Config("confusion_strength must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub words: Vec<String>,
    /// Stand-in for `log P(X | words)`; zero for the true transcription.
    pub acoustic_logscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub reference: Vec<String>,
    /// The reference first, then the confusions in generation order.
    pub candidates: Vec<Hypothesis>,
}

/// One line of the utterance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub reference: String,
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

fn random_letter(rng: &mut ChaCha8Rng) -> char {
    char::from(b'a' + rng.random_range(0..26u8))
}

/// Applies one substitute, delete, insert, split or merge edit.
fn perturb(chars: &mut Vec<char>, rng: &mut ChaCha8Rng) {
    let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != ' ').collect();
    let spaces: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] == ' ').collect();
    // interior positions where a space would split a word in two
    let splits: Vec<usize> = (1..chars.len())
        .filter(|&i| chars[i - 1] != ' ' && chars[i] != ' ')
        .collect();
    match rng.random_range(0..5) {
        1 if letters.len() > 1 => {
            chars.remove(letters[rng.random_range(0..letters.len())]);
        }
        2 => {
            let at = rng.random_range(0..=chars.len());
            chars.insert(at, random_letter(rng));
        }
        3 if !splits.is_empty() => chars.insert(splits[rng.random_range(0..splits.len())], ' '),
        4 if !spaces.is_empty() => {
            chars.remove(spaces[rng.random_range(0..spaces.len())]);
        }
        _ if !letters.is_empty() => {
            let at = letters[rng.random_range(0..letters.len())];
            chars[at] = random_letter(rng);
        }
        _ => chars.push(random_letter(rng)),
    }
}

/// Builds the seeded hypothesis set of a spoken name: up to `confusion_count`
/// distinct confusions made by one or two character edits, each token snapped
/// back onto the lexicon with a bias toward frequent words. Attempts leaving a
/// token with no lexicon word in snapping range are discarded, so names in sparse
/// regions of the lexicon can end up with fewer confusions.
pub fn generate_confusions<S: AsRef<str>>(
    name: &[S],
    lexicon: &Lexicon,
    cfg: &DecodeConfig,
) -> Result<HypothesisSet> {
    if lexicon.is_empty() {
        return Err(Error::InvalidInput("lexicon is empty".into()));
    }
    let joined = normalize_name(&name.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" "));
    if joined.is_empty() {
        return Err(Error::InvalidInput("cannot synthesize an empty name".into()));
    }
    let reference: Vec<String> = joined.split(' ').map(str::to_string).collect();
    let ref_chars: Vec<char> = joined.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a(&joined));

    let mut snapped: HashMap<(String, bool), Option<String>> = HashMap::new();
    let mut seen: HashSet<Vec<String>> = HashSet::from([reference.clone()]);
    let mut candidates = vec![Hypothesis { words: reference.clone(), acoustic_logscore: 0.0 }];
    let max_attempts = 40 * cfg.confusion_count;
    for _ in 0..max_attempts {
        if candidates.len() > cfg.confusion_count {
            break;
        }
        let mut chars = ref_chars.clone();
        for _ in 0..rng.random_range(1..=2) {
            perturb(&mut chars, &mut rng);
        }
        let noisy: String = chars.into_iter().collect();
        let mut words = Vec::new();
        for tok in noisy.split_whitespace() {
            let widen = rng.random_bool(0.5);
            let word = snapped
                .entry((tok.to_string(), widen))
                .or_insert_with(|| lexicon.nearest(tok, widen).map(str::to_string));
            match word {
                Some(w) => words.push(w.clone()),
                None => break,
            }
        }
        // tokens with no word within snapping range void the attempt
        let complete = words.len() == noisy.split_whitespace().count();
        if words.is_empty() || !complete || !seen.insert(words.clone()) {
            continue;
        }
        let hyp_chars: Vec<char> = words.join(" ").chars().collect();
        let d = edit_distance(&hyp_chars, &ref_chars);
        candidates.push(Hypothesis { words, acoustic_logscore: -cfg.confusion_strength * d as f64 });
    }
    Ok(HypothesisSet { reference, candidates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub words: String,
    pub acoustic: f64,
    pub lm: f64,
    pub total: f64,
}

/// Audit record for one decoded utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub reference: String,
    pub hypothesis: String,
    pub edits: usize,
    pub ref_len: usize,
    pub candidates: Vec<CandidateScore>,
}

fn best_index(hset: &HypothesisSet, totals: &[f64]) -> usize {
    (0..totals.len())
        .reduce(|best, i| {
            let better = totals[i] > totals[best]
                || (totals[i] == totals[best]
                    && hset.candidates[i].words < hset.candidates[best].words);
            if better { i } else { best }
        })
        .expect("hypothesis set is nonempty")
}

/// Picks the candidate maximizing `acoustic + lm_weight * log P_lm`; ties go to
/// the lexicographically smaller word sequence.
pub fn decode<'h, L: SentenceScorer + ?Sized>(
    hset: &'h HypothesisSet,
    lm: &L,
    cfg: &DecodeConfig,
) -> &'h Hypothesis {
    let totals: Vec<f64> = hset
        .candidates
        .iter()
        .map(|h| h.acoustic_logscore + cfg.lm_weight * lm.logprob(&h.words))
        .collect();
    &hset.candidates[best_index(hset, &totals)]
}

/// Decodes and records every candidate's score breakdown.
pub fn decode_trace<L: SentenceScorer + ?Sized>(
    hset: &HypothesisSet,
    lm: &L,
    cfg: &DecodeConfig,
) -> DecodeTrace {
    let candidates: Vec<CandidateScore> = hset
        .candidates
        .iter()
        .map(|h| {
            let lp = lm.logprob(&h.words);
            CandidateScore {
                words: h.words.join(" "),
                acoustic: h.acoustic_logscore,
                lm: lp,
                total: h.acoustic_logscore + cfg.lm_weight * lp,
            }
        })
        .collect();
    let totals: Vec<f64> = candidates.iter().map(|c| c.total).collect();
    let best = &hset.candidates[best_index(hset, &totals)];
    DecodeTrace {
        reference: hset.reference.join(" "),
        hypothesis: best.words.join(" "),
        edits: edit_distance(&hset.reference, &best.words),
        ref_len: hset.reference.len(),
        candidates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub wer: f64,
    /// `(word edits, reference length)` per utterance.
    pub per_utterance: Vec<(usize, usize)>,
}

impl WerReport {
    /// Per-utterance error rates, the samples of the paired significance test.
    pub fn utterance_rates(&self) -> Vec<f64> {
        self.per_utterance.iter().map(|&(e, n)| e as f64 / n as f64).collect()
    }
}

/// Corpus-level word error rate over `(reference, hypothesis)` pairs.
pub fn word_error_rate<S: AsRef<str> + PartialEq>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<WerReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no utterances to score".into()));
    }
    let mut per_utterance = Vec::with_capacity(pairs.len());
    for (r, h) in pairs {
        if r.is_empty() {
            return Err(Error::InvalidInput("empty reference".into()));
        }
        per_utterance.push((edit_distance(r, h), r.len()));
    }
    let (e, n) = per_utterance.iter().fold((0, 0), |(e, n), &(a, b)| (e + a, n + b));
    Ok(WerReport { wer: e as f64 / n as f64, per_utterance })
}

/// Whether the unboosted system already transcribes `name` exactly.
pub fn recognized_exactly(
    name: &EntityId,
    base: &NGramLm,
    lexicon: &Lexicon,
    cfg: &DecodeConfig,
) -> Result<bool> {
    let words: Vec<&str> = name.words().collect();
    let hset = generate_confusions(&words, lexicon, cfg)?;
    Ok(decode(&hset, base, cfg).words == hset.reference)
}

/// Walks `ranked` in order and keeps up to `k` names that `is_recognized` rejects.
pub fn feedback_filter_with<F>(ranked: &RankedList, k: usize, mut is_recognized: F) -> Result<Vec<EntityId>>
where
    F: FnMut(&EntityId) -> Result<bool>,
{
    let mut kept = Vec::with_capacity(k.min(ranked.len()));
    for e in ranked.entities() {
        if kept.len() >= k {
            break;
        }
        if !is_recognized(e)? {
            kept.push(e.clone());
        }
    }
    Ok(kept)
}

/// The boost list: the first `k` ranked names the unboosted system gets wrong.
pub fn feedback_filter(
    ranked: &RankedList,
    base: &NGramLm,
    lexicon: &Lexicon,
    cfg: &DecodeConfig,
    k: usize,
) -> Result<Vec<EntityId>> {
    feedback_filter_with(ranked, k, |e| recognized_exactly(e, base, lexicon, cfg))
}
