//! BLEU-4 and a stem-matching METEOR variant for scoring decompositions.

use std::collections::HashMap;

use rust_stemmers::{Algorithm, Stemmer};

use crate::text::words;

pub const MAX_ORDER: usize = 4;

fn ngrams(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Clipped n-gram matches and totals per order, plus lengths, for one segment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn of(candidate: &str, references: &[&str]) -> BleuStats {
        let cand = words(candidate);
        let refs: Vec<Vec<String>> = references.iter().map(|r| words(r)).collect();
        let mut s = BleuStats { candidate_len: cand.len(), ..Default::default() };
        // closest reference length, shorter on ties
        s.reference_len = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .unwrap_or(0);
        for n in 1..=MAX_ORDER {
            let counts = ngrams(&cand, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in &refs {
                for (g, c) in ngrams(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            s.totals[n - 1] = counts.values().sum();
            s.matches[n - 1] = counts.iter().map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0))).sum();
        }
        s
    }

    pub fn add(&mut self, o: &BleuStats) {
        for i in 0..MAX_ORDER {
            self.matches[i] += o.matches[i];
            self.totals[i] += o.totals[i];
        }
        self.candidate_len += o.candidate_len;
        self.reference_len += o.reference_len;
    }

    /// Geometric mean over the orders the candidate is long enough to have, times the
    /// brevity penalty. Zero if any such order has no match.
    pub fn score(&self) -> f64 {
        let orders: Vec<usize> = (0..MAX_ORDER).filter(|&i| self.totals[i] > 0).collect();
        if orders.is_empty() || self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for &i in &orders {
            if self.matches[i] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[i] as f64 / self.totals[i] as f64).ln();
        }
        let bp = if self.candidate_len >= self.reference_len {
            1.0
        } else {
            (1.0 - self.reference_len as f64 / self.candidate_len as f64).exp()
        };
        (bp * (log_sum / orders.len() as f64).exp()).clamp(0.0, 1.0)
    }
}

/// Sentence BLEU-4 against one or more references.
pub fn bleu(candidate: &str, references: &[&str]) -> f64 {
    BleuStats::of(candidate, references).score()
}

/// Corpus BLEU-4 from summed statistics over (candidate, references) pairs.
pub fn corpus_bleu<'a, I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (&'a str, Vec<&'a str>)>,
{
    let mut total = BleuStats::default();
    for (c, r) in pairs {
        total.add(&BleuStats::of(c, &r));
    }
    total.score()
}

fn stems(text: &str) -> Vec<String> {
    let s = Stemmer::create(Algorithm::English);
    words(text).iter().map(|w| s.stem(w).into_owned()).collect()
}

/// Recall-weighted harmonic mean `10PR / (R + 9P)` of unigram precision and recall, matching
/// words by stem. No synonym lexicon and no fragmentation penalty.
pub fn meteor_lite(candidate: &str, reference: &str) -> f64 {
    let c = stems(candidate);
    let r = stems(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut pool: HashMap<&str, usize> = HashMap::new();
    for w in &r {
        *pool.entry(w.as_str()).or_insert(0) += 1;
    }
    let mut m = 0usize;
    for w in &c {
        if let Some(n) = pool.get_mut(w.as_str()) {
            if *n > 0 {
                *n -= 1;
                m += 1;
            }
        }
    }
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / c.len() as f64;
    let rc = m as f64 / r.len() as f64;
    (10.0 * p * rc / (rc + 9.0 * p)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(bleu("which brand has the highest sales", &["which brand has the highest sales"]), 1.0);
        assert_eq!(bleu("alpha beta", &["gamma delta"]), 0.0);
        assert_eq!(meteor_lite("what is the trend", "what is the trend"), 1.0);
    }

    #[test]
    fn stems_match_plural_forms() {
        assert_eq!(meteor_lite("reviews", "review"), 1.0);
    }

    #[test]
    fn multiple_references_clip_by_max() {
        let s = BleuStats::of("the the the", &["the cat", "the the"]);
        assert_eq!(s.matches[0], 2);
        assert_eq!(s.reference_len, 2);
    }
}
