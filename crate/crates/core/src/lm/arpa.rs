use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use super::{NGramLm, SentenceScorer, BOS, BOS_ID, EOS, UNK};
use crate::error::{Error, Result};

/// Log10 probability written for n-grams that only exist as contexts.
const NEVER: f64 = -99.0;

/// Writes the interpolated model in back-off form: every observed n-gram with its
/// interpolated probability, and every observed context with the weight
/// `N(h) / (C(h) + N(h))` it passes to the next lower order.
pub fn export_arpa(lm: &NGramLm) -> String {
    let vocab = lm.vocab();
    let mut sections: Vec<Vec<(Vec<u32>, f64, Option<f64>)>> = Vec::with_capacity(lm.order);
    for n in 1..=lm.order {
        let l = n - 1;
        let bow = |key: &[u32]| (n < lm.order).then(|| lm.backoff_ids(key)).flatten();
        let mut entries: Vec<(Vec<u32>, f64, Option<f64>)> = if n == 1 {
            (0..vocab.len() as u32)
                .map(|id| {
                    let p = if id == BOS_ID { NEVER } else { lm.prob_ids(&[], id).log10() };
                    (vec![id], p, bow(&[id]))
                })
                .collect()
        } else {
            lm.ngrams[l]
                .keys()
                .map(|key| (key.to_vec(), lm.prob_ids(&key[..l], key[l]).log10(), bow(key)))
                .collect()
        };
        if n > 1 && n < lm.order {
            for key in lm.contexts[n].keys() {
                if !lm.ngrams[l].contains_key(key) {
                    entries.push((key.to_vec(), NEVER, bow(key)));
                }
            }
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        sections.push(entries);
    }

    let mut out = String::from("\n\\data\\\n");
    for (i, s) in sections.iter().enumerate() {
        let _ = writeln!(out, "ngram {}={}", i + 1, s.len());
    }
    for (i, s) in sections.iter().enumerate() {
        let _ = write!(out, "\n\\{}-grams:\n", i + 1);
        for (key, p, bow) in s {
            let words: Vec<&str> = key.iter().map(|&id| vocab.word(id)).collect();
            let _ = write!(out, "{p}\t{}", words.join(" "));
            if let Some(b) = bow {
                let _ = write!(out, "\t{}", b.log10());
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

/// A back-off model read from ARPA text, scored with the same sentence padding
/// as [`NGramLm`].
#[derive(Debug, Clone)]
pub struct ArpaModel {
    order: usize,
    /// `grams[n - 1]` maps space-joined n-grams to `(log10 p, log10 bow)`.
    grams: Vec<HashMap<String, (f64, f64)>>,
}

impl ArpaModel {
    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut declared: Vec<usize> = Vec::new();
        let mut grams: Vec<HashMap<String, (f64, f64)>> = Vec::new();
        let mut section: Option<usize> = None;
        let mut in_data = false;
        let mut ended = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            if line.is_empty() || ended {
                continue;
            }
            if line == "\\data\\" {
                in_data = true;
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                continue;
            }
            if let Some(rest) = line.strip_prefix("ngram ") {
                if !in_data || section.is_some() {
                    return Err(err("ngram count outside the data header".into()));
                }
                let (n, count) = rest
                    .split_once('=')
                    .and_then(|(n, c)| Some((n.trim().parse::<usize>().ok()?, c.trim().parse().ok()?)))
                    .ok_or_else(|| err(format!("bad count line `{line}`")))?;
                if n != declared.len() + 1 {
                    return Err(err(format!("ngram orders out of sequence at {n}")));
                }
                declared.push(count);
                continue;
            }
            if let Some(n) = line.strip_prefix('\\').and_then(|s| s.strip_suffix("-grams:")) {
                let n: usize = n.parse().map_err(|_| err(format!("bad section `{line}`")))?;
                if n == 0 || n > declared.len() {
                    return Err(err(format!("section {n} not declared in the header")));
                }
                grams.resize_with(declared.len(), HashMap::new);
                section = Some(n);
                continue;
            }
            let n = section.ok_or_else(|| err(format!("unexpected line `{line}`")))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != n + 1 && fields.len() != n + 2 {
                return Err(err(format!("expected {n} words in `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
            let p = num(fields[0])?;
            let bow = if fields.len() == n + 2 { num(fields[n + 1])? } else { 0.0 };
            grams[n - 1].insert(fields[1..=n].join(" "), (p, bow));
        }
        if declared.is_empty() || !ended {
            return Err(Error::Parse { line: 0, msg: "incomplete ARPA document".into() });
        }
        for (n, (&want, got)) in declared.iter().zip(&grams).enumerate() {
            if want != got.len() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("{}-gram header declares {want} entries, found {}", n + 1, got.len()),
                });
            }
        }
        if !grams[0].contains_key(UNK) || !grams[0].contains_key(EOS) {
            return Err(Error::Parse { line: 0, msg: "unigrams lack `<unk>` or `</s>`".into() });
        }
        Ok(Self { order: declared.len(), grams })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entries listed for n-grams of length `n`.
    pub fn ngram_count(&self, n: usize) -> usize {
        self.grams.get(n.wrapping_sub(1)).map_or(0, HashMap::len)
    }

    fn log10_prob(&self, ctx: &[&str], w: &str) -> f64 {
        let mut key = ctx.join(" ");
        if !ctx.is_empty() {
            key.push(' ');
        }
        key.push_str(w);
        if let Some(&(p, _)) = self.grams[ctx.len()].get(&key) {
            return p;
        }
        if ctx.is_empty() {
            return f64::NEG_INFINITY;
        }
        let bow = self.grams[ctx.len() - 1].get(&ctx.join(" ")).map_or(0.0, |e| e.1);
        bow + self.log10_prob(&ctx[1..], w)
    }

    /// Natural-log probability of `<s> words </s>`.
    pub fn sentence_logprob<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        let mut toks: Vec<&str> = vec![BOS; self.order - 1];
        for w in words {
            let w = w.as_ref();
            let known = w != BOS && w != EOS && self.grams[0].contains_key(w);
            toks.push(if known { w } else { UNK });
        }
        toks.push(EOS);
        let h = self.order - 1;
        let log10: f64 = (h..toks.len()).map(|j| self.log10_prob(&toks[j - h..j], toks[j])).sum();
        log10 * std::f64::consts::LN_10
    }
}

impl SentenceScorer for ArpaModel {
    fn logprob(&self, words: &[String]) -> f64 {
        self.sentence_logprob(words)
    }
}
