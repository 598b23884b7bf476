//! Pseudo-word vocabulary, entity names and filler sentences for the synthetic world.
//!
//! Words are built from a small syllable inventory so that the vocabulary is dense
//! in edit-distance space: most words have in-vocabulary neighbours one or two
//! character edits away, which is what the confusion channel needs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Zipf};

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "ch",
    "sh",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "m", "t", "k"];

fn syllable<R: Rng + ?Sized>(rng: &mut R) -> String {
    let mut s = String::new();
    s.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
    s.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    s.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    s
}

/// A set of distinct lowercase pseudo-words in generation order.
#[derive(Debug, Clone)]
pub struct WordPool {
    words: Vec<String>,
}

impl WordPool {
    pub fn generate<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        let mut seen = HashSet::with_capacity(size);
        let mut words = Vec::with_capacity(size);
        while words.len() < size {
            let n_syl = match rng.random_range(0..10) {
                0..=1 => 1,
                2..=6 => 2,
                _ => 3,
            };
            let w: String = (0..n_syl).map(|_| syllable(rng)).collect();
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        Self { words }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// A sampler drawing pool words with Zipfian popularity over a seeded permutation.
    pub fn zipf_sampler<R: Rng + ?Sized>(&self, exponent: f64, rng: &mut R) -> ZipfWords<'_> {
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.shuffle(rng);
        let dist = Zipf::new(self.words.len() as f64, exponent).expect("valid zipf parameters");
        ZipfWords { pool: self, order, dist }
    }
}

pub struct ZipfWords<'a> {
    pool: &'a WordPool,
    order: Vec<usize>,
    dist: Zipf<f64>,
}

impl ZipfWords<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        let rank = self.dist.sample(rng) as usize;
        &self.pool.words[self.order[rank - 1]]
    }
}

/// `count` distinct entity names of one to three pool words.
pub fn entity_names<R: Rng + ?Sized>(pool: &WordPool, count: usize, rng: &mut R) -> Vec<String> {
    let sampler = pool.zipf_sampler(0.7, rng);
    let mut seen = HashSet::with_capacity(count);
    let mut names = Vec::with_capacity(count);
    while names.len() < count {
        let n_words = match rng.random_range(0..10) {
            0..=2 => 1,
            3..=7 => 2,
            _ => 3,
        };
        let name = (0..n_words)
            .map(|_| sampler.sample(rng))
            .collect::<Vec<_>>()
            .join(" ");
        if seen.insert(name.clone()) {
            names.push(name);
        }
    }
    names
}

/// Non-entity filler sentences of three to eight words.
pub fn general_sentences<R: Rng + ?Sized>(
    pool: &WordPool,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<String>> {
    let sampler = pool.zipf_sampler(1.0, rng);
    (0..count)
        .map(|_| {
            let len = rng.random_range(3..=8);
            (0..len).map(|_| sampler.sample(rng).to_string()).collect()
        })
        .collect()
}
