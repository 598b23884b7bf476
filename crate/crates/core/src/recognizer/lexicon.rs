use std::collections::{HashMap, HashSet};

use crate::lm::NGramLm;

/// Levenshtein distance between two sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character-level Levenshtein distance.
pub fn char_distance(a: &str, b: &str) -> usize {
    if a.is_ascii() && b.is_ascii() {
        return edit_distance(a.as_bytes(), b.as_bytes());
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

fn deletes(word: &str, depth: usize, out: &mut HashSet<String>) {
    if !out.insert(word.to_string()) || depth == 0 {
        return;
    }
    for (i, c) in word.char_indices() {
        let shorter = format!("{}{}", &word[..i], &word[i + c.len_utf8()..]);
        deletes(&shorter, depth - 1, out);
    }
}

/// In-vocabulary words with frequencies and a deletion index for fast
/// nearest-word lookup.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: Vec<String>,
    freq: Vec<f64>,
    index: HashMap<String, Vec<u32>>,
}

/// Largest edit distance at which a token is snapped onto a lexicon word.
pub const SNAP_RADIUS: usize = 2;

impl Lexicon {
    /// Builds a lexicon from `(word, frequency)` pairs; later duplicates are ignored.
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Self {
        let mut words = Vec::new();
        let mut freq = Vec::new();
        let mut seen = HashSet::new();
        for (w, f) in entries {
            let w = w.into();
            if !w.is_empty() && seen.insert(w.clone()) {
                words.push(w);
                freq.push(f);
            }
        }
        let mut index: HashMap<String, Vec<u32>> = HashMap::new();
        let mut variants = HashSet::new();
        for (i, w) in words.iter().enumerate() {
            variants.clear();
            deletes(w, SNAP_RADIUS, &mut variants);
            for v in variants.drain() {
                index.entry(v).or_default().push(i as u32);
            }
        }
        Self { words, freq, index }
    }

    /// The surface words of `lm` weighted by their unigram counts.
    pub fn from_lm(lm: &NGramLm) -> Self {
        Self::new(lm.vocab().surface_words().map(|w| (w, lm.unigram_count(w))))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn position(&self, word: &str) -> Option<usize> {
        let ids = self.index.get(word)?;
        ids.iter().map(|&i| i as usize).find(|&i| self.words[i] == word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.position(word).is_some()
    }

    pub fn frequency(&self, word: &str) -> Option<f64> {
        self.position(word).map(|i| self.freq[i])
    }

    fn within_index(&self, token: &str) -> Vec<(usize, u32)> {
        let mut variants = HashSet::new();
        deletes(token, SNAP_RADIUS, &mut variants);
        let mut ids: Vec<u32> =
            variants.iter().filter_map(|v| self.index.get(v)).flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|i| (char_distance(token, &self.words[i as usize]), i))
            .filter(|&(d, _)| d <= SNAP_RADIUS)
            .collect()
    }

    /// Snaps `token` to an in-vocabulary word within [`SNAP_RADIUS`] edits: among
    /// words at the minimal distance (or one farther when `widen` is set) the most
    /// frequent wins, ties going to the lexicographically smaller word. `None` when
    /// no word is close enough.
    pub fn nearest(&self, token: &str, widen: bool) -> Option<&str> {
        let near = self.within_index(token);
        let dmin = near.iter().map(|&(d, _)| d).min()?;
        let limit = (dmin + usize::from(widen)).min(SNAP_RADIUS);
        near.into_iter()
            .filter(|&(d, _)| d <= limit)
            .map(|(_, i)| i as usize)
            .max_by(|&a, &b| {
                self.freq[a]
                    .total_cmp(&self.freq[b])
                    .then_with(|| self.words[b].cmp(&self.words[a]))
            })
            .map(|i| self.words[i].as_str())
    }
}
