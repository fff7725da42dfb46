//! Edit-distance text similarity, pluggable semantic similarity and their combined score.

use std::collections::HashMap;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::words;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider failed: {0}")]
    Failed(String),
    #[error("provider returned a vector of dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - D(a, b) / max(|a|, |b|)` with lengths in characters; two empty strings score 1.
pub fn text_sim(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Encodes text as a unit-norm vector of fixed dimension.
pub trait SimilarityProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn encode(&self, text: &str) -> Result<Vec<f64>, ProviderError>;

    /// Non-zero entries of [`encode`](Self::encode), in ascending index order.
    fn encode_sparse(&self, text: &str) -> Result<Vec<(usize, f64)>, ProviderError> {
        Ok(self
            .encode(text)?
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect())
    }
}

pub fn dot_sparse(dense: &[f64], sparse: &[(usize, f64)]) -> f64 {
    sparse.iter().map(|&(i, v)| dense.get(i).copied().unwrap_or(0.0) * v).sum()
}

/// Cosine similarity of the two encodings (their dot product, as both are unit norm).
pub fn semantic_sim(a: &str, b: &str, p: &dyn SimilarityProvider) -> Result<f64, ProviderError> {
    let va = p.encode(a)?;
    let vb = p.encode_sparse(b)?;
    Ok(dot_sparse(&va, &vb).clamp(-1.0, 1.0))
}

/// `S = S_s - S_t`; positive when two texts share meaning but differ in wording.
pub fn combined_score(q_m: &str, q_r: &str, p: &dyn SimilarityProvider) -> Result<f64, ProviderError> {
    Ok(semantic_sim(q_m, q_r, p)? - text_sim(q_m, q_r))
}

const DIM_BITS: u32 = 14;
const WORD_WEIGHT: f64 = 1.0;
const TRIGRAM_WEIGHT: f64 = 0.5;

fn bucket(tag: u8, feature: &str) -> usize {
    let mut h = FnvHasher::default();
    h.write_u8(tag);
    h.write(feature.as_bytes());
    (h.finish() & ((1u64 << DIM_BITS) - 1)) as usize
}

/// Hashed word-unigram and character-trigram features with raw counts.
fn features(text: &str) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for w in words(text) {
        *counts.entry(bucket(b'w', &w)).or_default() += WORD_WEIGHT;
        let padded: Vec<char> = format!(" {w} ").chars().collect();
        for tri in padded.windows(3) {
            let tri: String = tri.iter().collect();
            *counts.entry(bucket(b't', &tri)).or_default() += TRIGRAM_WEIGHT;
        }
    }
    let mut v: Vec<(usize, f64)> = counts.into_iter().collect();
    v.sort_by_key(|&(i, _)| i);
    v
}

/// Deterministic TF-IDF encoder over hashed word and character-trigram features.
///
/// Unfitted, every feature has weight 1. [`ReferenceProvider::fit`] sets smoothed IDF weights
/// from a corpus, normally every template question for the loaded table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReferenceProvider {
    idf: HashMap<usize, f64>,
    default_idf: f64,
}

impl ReferenceProvider {
    pub fn new() -> ReferenceProvider {
        ReferenceProvider { idf: HashMap::new(), default_idf: 1.0 }
    }

    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> ReferenceProvider {
        let n = corpus.len() as f64;
        let mut df: HashMap<usize, f64> = HashMap::new();
        for doc in corpus {
            for (i, _) in features(doc.as_ref()) {
                *df.entry(i).or_default() += 1.0;
            }
        }
        let idf = df
            .into_iter()
            .map(|(i, d)| (i, ((1.0 + n) / (1.0 + d)).ln() + 1.0))
            .collect();
        ReferenceProvider { idf, default_idf: (1.0 + n).ln() + 1.0 }
    }

    fn weighted(&self, text: &str) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = features(text)
            .into_iter()
            .map(|(i, c)| (i, c * self.idf.get(&i).copied().unwrap_or(self.default_idf)))
            .collect();
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

impl SimilarityProvider for ReferenceProvider {
    fn dim(&self) -> usize {
        1 << DIM_BITS
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut dense = vec![0.0; self.dim()];
        let sparse = self.weighted(text);
        if sparse.is_empty() {
            // Texts without words still need a unit vector; use a reserved bucket.
            dense[0] = 1.0;
        }
        for (i, x) in sparse {
            dense[i] = x;
        }
        Ok(dense)
    }

    fn encode_sparse(&self, text: &str) -> Result<Vec<(usize, f64)>, ProviderError> {
        let v = self.weighted(text);
        Ok(if v.is_empty() { vec![(0, 1.0)] } else { v })
    }
}

#[derive(Serialize)]
struct EncodeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EncodeResponse {
    vector: Vec<f64>,
}

/// External encoder speaking line-delimited JSON over stdin/stdout.
///
/// Each request is `{"text": ...}`; each reply `{"vector": [...]}`. Replies are L2-normalized.
pub struct SubprocessProvider {
    dim: usize,
    io: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl SubprocessProvider {
    pub fn spawn(program: &str, args: &[String], dim: usize) -> Result<SubprocessProvider, ProviderError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ProviderError::Failed(format!("spawn {program}: {e}")))?;
        let stdin = child.stdin.take().ok_or_else(|| ProviderError::Failed("no stdin".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| ProviderError::Failed("no stdout".into()))?;
        Ok(SubprocessProvider { dim, io: Mutex::new((child, stdin, BufReader::new(stdout))) })
    }
}

impl SimilarityProvider for SubprocessProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let fail = |e: &dyn std::fmt::Display| ProviderError::Failed(e.to_string());
        let mut guard = self.io.lock().map_err(|e| fail(&e))?;
        let (_, stdin, stdout) = &mut *guard;
        let line = serde_json::to_string(&EncodeRequest { text }).map_err(|e| fail(&e))?;
        writeln!(stdin, "{line}").map_err(|e| fail(&e))?;
        stdin.flush().map_err(|e| fail(&e))?;
        let mut reply = String::new();
        if stdout.read_line(&mut reply).map_err(|e| fail(&e))? == 0 {
            return Err(ProviderError::Failed("provider closed its output".into()));
        }
        let mut v = serde_json::from_str::<EncodeResponse>(&reply).map_err(|e| fail(&e))?.vector;
        if v.len() != self.dim {
            return Err(ProviderError::Dimension { expected: self.dim, found: v.len() });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(ProviderError::Failed("provider returned a zero or non-finite vector".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

impl Drop for SubprocessProvider {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.io.lock() {
            let _ = guard.0.kill();
            let _ = guard.0.wait();
        }
    }
}

/// Uses `primary`, switching to `fallback` for any text the primary fails on.
pub struct WithFallback<P, F> {
    pub primary: P,
    pub fallback: F,
}

impl<P: SimilarityProvider, F: SimilarityProvider> SimilarityProvider for WithFallback<P, F> {
    fn dim(&self) -> usize {
        self.primary.dim()
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.primary.encode(text).or_else(|_| self.fallback.encode(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abcd"), 4);
        assert_eq!(levenshtein("héllo", "hello"), 1);
    }

    #[test]
    fn text_sim_examples() {
        assert_eq!(text_sim("same", "same"), 1.0);
        assert!((text_sim("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(text_sim("aaa", "bbb"), 0.0);
        assert_eq!(text_sim("", ""), 1.0);
    }

    #[test]
    fn reference_vectors_are_unit_norm() {
        let p = ReferenceProvider::fit(&["which brand has the highest sales?", "what is the trend?"]);
        for t in ["which brand has the highest sales?", "", "zzz"] {
            let v = p.encode(t).unwrap();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_text_scores_one_and_combined_zero() {
        let p = ReferenceProvider::new();
        let q = "what is the trend of sales over year?";
        assert!((semantic_sim(q, q, &p).unwrap() - 1.0).abs() < 1e-9);
        assert!(combined_score(q, q, &p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn related_question_ranks_above_unrelated() {
        let p = ReferenceProvider::fit(&[
            "which brand has the highest sales?",
            "what is the trend of price?",
            "what is the total sales?",
        ]);
        let a = semantic_sim("highest sales brand", "which brand has the highest sales", &p).unwrap();
        let b = semantic_sim("highest sales brand", "what is the trend of price", &p).unwrap();
        assert!(a > b);
    }

    struct Axis(usize);

    impl SimilarityProvider for Axis {
        fn dim(&self) -> usize {
            2
        }
        fn encode(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
            let mut v = vec![0.0; 2];
            v[self.0] = 1.0;
            Ok(v)
        }
    }

    struct Broken;

    impl SimilarityProvider for Broken {
        fn dim(&self) -> usize {
            2
        }
        fn encode(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
            Err(ProviderError::Failed("down".into()))
        }
    }

    #[test]
    fn orthogonal_stub_vectors_score_zero() {
        let a = Axis(0).encode("x").unwrap();
        let b = Axis(1).encode_sparse("y").unwrap();
        assert_eq!(dot_sparse(&a, &b), 0.0);
    }

    #[test]
    fn fallback_recovers_from_failures() {
        assert!(semantic_sim("a", "b", &Broken).is_err());
        let p = WithFallback { primary: Broken, fallback: Axis(1) };
        assert_eq!(semantic_sim("a", "b", &p).unwrap(), 1.0);
    }
}
