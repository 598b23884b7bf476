use std::collections::HashMap;

use super::{NGramLm, SentenceScorer, BOS, ENTITY, EOS, UNK};
use crate::error::{Error, Result};
use crate::querylog::normalize_name;

/// A base model with `<entity>` expanded into a uniform distribution over names.
///
/// A boosted name is reachable both as a plain word sequence and through the
/// `<s> <entity> </s>` sentence; its probability is the sum of the two paths.
#[derive(Debug, Clone)]
pub struct BoostedLm<'a> {
    base: &'a NGramLm,
    names: Vec<String>,
    q: HashMap<String, f64>,
    entity_prob: f64,
}

/// Splices a uniform `Q(name | <entity>)` over the distinct normalized `names`.
pub fn splice_entity_distribution<'a, S: AsRef<str>>(
    base: &'a NGramLm,
    names: &[S],
) -> Result<BoostedLm<'a>> {
    let mut ordered = Vec::with_capacity(names.len());
    let mut q = HashMap::with_capacity(names.len());
    for raw in names {
        let name = normalize_name(raw.as_ref());
        if name.is_empty() {
            return Err(Error::InvalidInput("boosted name is empty".into()));
        }
        if name.split(' ').any(|w| [BOS, EOS, UNK, ENTITY].contains(&w)) {
            return Err(Error::InvalidInput(format!("boosted name `{name}` holds a reserved token")));
        }
        if q.insert(name.clone(), 0.0).is_none() {
            ordered.push(name);
        }
    }
    if ordered.is_empty() {
        return Err(Error::InvalidInput("boosted name list is empty".into()));
    }
    let share = 1.0 / ordered.len() as f64;
    q.values_mut().for_each(|v| *v = share);
    Ok(BoostedLm { base, names: ordered, q, entity_prob: base.entity_sentence_prob() })
}

impl<'a> BoostedLm<'a> {
    pub fn base(&self) -> &'a NGramLm {
        self.base
    }

    /// Distinct boosted names in first-seen order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn q(&self, name: &str) -> Option<f64> {
        self.q.get(&normalize_name(name)).copied()
    }

    /// `P_base(<s> <entity> </s>)`.
    pub fn entity_path_prob(&self) -> f64 {
        self.entity_prob
    }

    /// Mass the entity path adds to `words`, zero for names outside the list.
    pub fn entity_path_mass<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        let joined = words.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
        self.q(&joined).map_or(0.0, |q| self.entity_prob * q)
    }

    pub fn sentence_prob<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        self.base.sentence_logprob(words).exp() + self.entity_path_mass(words)
    }

    /// Natural-log path-sum probability, exact for names whose base probability underflows.
    pub fn sentence_logprob<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        let base = self.base.sentence_logprob(words);
        let extra = self.entity_path_mass(words);
        if extra == 0.0 {
            return base;
        }
        let e = extra.ln();
        let (hi, lo) = if base > e { (base, e) } else { (e, base) };
        hi + (lo - hi).exp().ln_1p()
    }
}

impl SentenceScorer for BoostedLm<'_> {
    fn logprob(&self, words: &[String]) -> f64 {
        self.sentence_logprob(words)
    }
}
