//! Word n-gram language model with Witten-Bell interpolation.
//!
//! Sentences are padded with `order - 1` start markers and one end marker. The
//! model reserves an `<entity>` class token which training data can carry at a
//! chosen share; [`splice_entity_distribution`] later expands that token into a
//! uniform distribution over a list of boosted entity names.

mod arpa;
mod boost;

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub use arpa::{export_arpa, ArpaModel};
pub use boost::{splice_entity_distribution, BoostedLm};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const ENTITY: &str = "<entity>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;
const SPECIALS: [&str; 4] = [BOS, EOS, UNK, ENTITY];

pub const DEFAULT_ORDER: usize = 4;

/// Anything that assigns a natural-log probability to a whole sentence.
pub trait SentenceScorer {
    fn logprob(&self, words: &[String]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSentence {
    pub words: Vec<String>,
    pub weight: f64,
}

impl WeightedSentence {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>, weight: f64) -> Self {
        Self { words: words.into_iter().map(Into::into).collect(), weight }
    }
}

/// Reads one sentence per line, with an optional tab-separated leading weight.
pub fn parse_corpus<R: BufRead>(input: R) -> Result<Vec<WeightedSentence>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (weight, text) = match line.split_once('\t') {
            Some((w, text)) => {
                let w: f64 = w.trim().parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("bad sentence weight `{w}`"),
                })?;
                (w, text)
            }
            None => (1.0, line.as_str()),
        };
        let words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if words.is_empty() {
            return Err(Error::Parse { line: i + 1, msg: "sentence has no words".into() });
        }
        out.push(WeightedSentence { words, weight });
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(corpus: &[WeightedSentence], mut out: W) -> Result<()> {
    for s in corpus {
        writeln!(out, "{}\t{}", s.weight, s.words.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Appends the one-token sentence `<entity>` so that it carries an `alpha` share
/// of the total sentence weight.
pub fn inject_entity_token(
    mut corpus: Vec<WeightedSentence>,
    alpha: f64,
) -> Result<Vec<WeightedSentence>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidInput("cannot inject into an empty corpus".into()));
    }
    let total: f64 = corpus.iter().map(|s| s.weight).sum();
    corpus.push(WeightedSentence::new([ENTITY], alpha * total / (1.0 - alpha)));
    Ok(corpus)
}

/// Token inventory: the four specials followed by the training words in sorted order.
#[derive(Debug, Clone)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_words(words: BTreeSet<String>) -> Self {
        let words: Vec<String> =
            SPECIALS.iter().map(|s| s.to_string()).chain(words).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// The id of `word`, or of `<unk>` when it is not in the vocabulary.
    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Every token except `<s>`, in id order.
    pub fn predictable(&self) -> impl Iterator<Item = &str> {
        self.words[1..].iter().map(String::as_str)
    }

    /// Ordinary words, without the specials.
    pub fn surface_words(&self) -> impl Iterator<Item = &str> {
        self.words[SPECIALS.len()..].iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ContextStats {
    total: f64,
    distinct: u32,
}

#[derive(Debug, Clone)]
pub struct NGramLm {
    order: usize,
    vocab: Vocab,
    /// `ngrams[l]` maps a context of length `l` followed by a word to its weighted count.
    ngrams: Vec<HashMap<Box<[u32]>, f64>>,
    /// `contexts[l]` holds total weight and distinct continuations of each observed context.
    contexts: Vec<HashMap<Box<[u32]>, ContextStats>>,
}

fn padded_ids(order: usize, words: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut ids = vec![BOS_ID; order - 1];
    ids.extend(words);
    ids.push(EOS_ID);
    ids
}

/// Trains an interpolated Witten-Bell model of the given order.
pub fn train(corpus: &[WeightedSentence], order: usize) -> Result<NGramLm> {
    if order == 0 {
        return Err(Error::Config("model order must be at least 1".into()));
    }
    let mut words = BTreeSet::new();
    let mut total = 0.0;
    for s in corpus {
        if !(s.weight >= 0.0) || !s.weight.is_finite() {
            return Err(Error::InvalidInput(format!("bad sentence weight {}", s.weight)));
        }
        if s.words.is_empty() {
            return Err(Error::InvalidInput("empty training sentence".into()));
        }
        for w in &s.words {
            if w == BOS || w == EOS || w == UNK {
                return Err(Error::InvalidInput(format!("reserved token `{w}` in corpus")));
            }
            if s.weight > 0.0 && w != ENTITY {
                words.insert(w.clone());
            }
        }
        total += s.weight;
    }
    if !(total > 0.0) {
        return Err(Error::InvalidInput("training corpus carries no weight".into()));
    }

    let vocab = Vocab::from_words(words);
    let mut ngrams: Vec<HashMap<Box<[u32]>, f64>> = vec![HashMap::new(); order];
    let mut contexts: Vec<HashMap<Box<[u32]>, ContextStats>> = vec![HashMap::new(); order];
    for s in corpus.iter().filter(|s| s.weight > 0.0) {
        let ids = padded_ids(order, s.words.iter().map(|w| vocab.id(w)));
        for j in order - 1..ids.len() {
            for l in 0..order {
                let key = &ids[j - l..=j];
                let slot = ngrams[l].entry(key.into()).or_insert(0.0);
                let fresh = *slot == 0.0;
                *slot += s.weight;
                let ctx = contexts[l].entry(key[..l].into()).or_default();
                ctx.total += s.weight;
                ctx.distinct += u32::from(fresh);
            }
        }
    }
    Ok(NGramLm { order, vocab, ngrams, contexts })
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Number of distinct observed n-grams of length `n`.
    pub fn distinct_ngrams(&self, n: usize) -> usize {
        if n == 0 || n > self.order {
            return 0;
        }
        self.ngrams[n - 1].len()
    }

    /// Weighted training count of `word` as a predicted unigram.
    pub fn unigram_count(&self, word: &str) -> f64 {
        match self.vocab.index.get(word) {
            Some(&id) => self.ngrams[0].get(&[id][..]).copied().unwrap_or(0.0),
            None => 0.0,
        }
    }

    /// Every observed context, as token strings, in sorted order.
    pub fn observed_contexts(&self) -> Vec<Vec<String>> {
        let mut keys: Vec<&[u32]> =
            self.contexts.iter().flat_map(|m| m.keys().map(|k| &k[..])).collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|k| k.iter().map(|&id| self.vocab.word(id).to_string()).collect())
            .collect()
    }

    fn uniform(&self) -> f64 {
        1.0 / (self.vocab.len() - 1) as f64
    }

    /// Interpolated probability of `w` after the id context `ctx` (at most `order - 1` long).
    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let mut p = self.uniform();
        let mut key = Vec::with_capacity(ctx.len() + 1);
        for l in 0..=ctx.len() {
            let h = &ctx[ctx.len() - l..];
            let Some(stats) = self.contexts[l].get(h) else {
                break;
            };
            key.clear();
            key.extend_from_slice(h);
            key.push(w);
            let c = self.ngrams[l].get(&key[..]).copied().unwrap_or(0.0);
            let n = f64::from(stats.distinct);
            p = (c + n * p) / (stats.total + n);
        }
        p
    }

    fn backoff_ids(&self, ctx: &[u32]) -> Option<f64> {
        self.contexts[ctx.len()].get(ctx).map(|s| {
            let n = f64::from(s.distinct);
            n / (s.total + n)
        })
    }

    fn token_id(&self, word: &str) -> u32 {
        match self.vocab.id(word) {
            BOS_ID | EOS_ID => UNK_ID,
            id => id,
        }
    }

    /// `P(word | history)`. A history that opens with `<s>` is treated as a sentence
    /// start and padded like a training sentence, so raw observed contexts and
    /// shorter sentence prefixes both work.
    pub fn cond_prob<S: AsRef<str>>(&self, history: &[S], word: &str) -> Result<f64> {
        if word == BOS {
            return Err(Error::InvalidInput("`<s>` is never predicted".into()));
        }
        let mut ids = Vec::with_capacity(history.len() + self.order);
        for (i, h) in history.iter().enumerate() {
            match h.as_ref() {
                EOS => return Err(Error::InvalidInput("`</s>` cannot be conditioned on".into())),
                BOS if ids.iter().any(|&id| id != BOS_ID) => {
                    return Err(Error::InvalidInput("`<s>` only opens a history".into()))
                }
                BOS if i == 0 => ids.extend(std::iter::repeat(BOS_ID).take(self.order - 1)),
                BOS => {}
                w => ids.push(self.vocab.id(w)),
            }
        }
        let keep = ids.len().min(self.order - 1);
        Ok(self.prob_ids(&ids[ids.len() - keep..], self.vocab.id(word)))
    }

    /// Natural-log probability of `<s> words </s>`. Words outside the vocabulary,
    /// including stray spellings of the sentence markers, score as `<unk>`.
    pub fn sentence_logprob<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        let ids =
            padded_ids(self.order, words.iter().map(|w| self.token_id(w.as_ref())));
        let h = self.order - 1;
        (h..ids.len()).map(|j| self.prob_ids(&ids[j - h..j], ids[j]).ln()).sum()
    }

    /// `P(<s> <entity> </s>)`, the mass available to a spliced name list.
    pub fn entity_sentence_prob(&self) -> f64 {
        self.sentence_logprob(&[ENTITY]).exp()
    }
}

impl SentenceScorer for NGramLm {
    fn logprob(&self, words: &[String]) -> f64 {
        self.sentence_logprob(words)
    }
}
