//! Training pairs from corpus entries, and the seeded toy corpus.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tabqa_core::corpus::{generate, Corpus, CorpusEntry, Method};
use tabqa_core::fixtures;
use tabqa_core::question::formulate;
use tabqa_core::table::DataTable;
use tabqa_core::text::words;

use crate::backprop::TrainingPair;
use crate::model::DEFAULT_MAX_LEN;

pub const TOY_PAIRS: usize = 32;

/// The pair for one corpus entry over its table, or `None` when a target is too long or
/// the entry does not have two sub-questions.
pub fn pair_from_entry(e: &CorpusEntry, x: &DataTable) -> Option<TrainingPair> {
    let [a, b] = e.sub_questions.as_slice() else { return None };
    let targets = (words(a), words(b));
    if targets.0.len() > DEFAULT_MAX_LEN || targets.1.len() > DEFAULT_MAX_LEN {
        return None;
    }
    Some(TrainingPair { input: formulate(&e.complex_question, x).input_tokens(), condition: e.method.class(), targets })
}

/// Pairs for every entry whose table is in `tables`, in corpus order.
pub fn training_pairs(corpus: &Corpus, tables: &[DataTable]) -> Vec<TrainingPair> {
    let by_name: BTreeMap<&str, &DataTable> = tables.iter().map(|t| (t.name(), t)).collect();
    corpus
        .entries
        .iter()
        .filter_map(|e| by_name.get(e.table_id.as_str()).and_then(|x| pair_from_entry(e, x)))
        .collect()
}

/// Thirty-two pairs over the books table, drawn round-robin across generation methods
/// after a seeded shuffle.
pub fn toy_corpus(seed: u64) -> Vec<TrainingPair> {
    let x = fixtures::books();
    let corpus = generate(std::slice::from_ref(&x), seed, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Vec<&CorpusEntry>> = Method::ALL
        .iter()
        .map(|m| {
            let mut g: Vec<&CorpusEntry> = corpus.entries.iter().filter(|e| e.method == *m).collect();
            g.shuffle(&mut rng);
            g
        })
        .collect();
    let mut out = Vec::with_capacity(TOY_PAIRS);
    while out.len() < TOY_PAIRS && groups.iter().any(|g| !g.is_empty()) {
        for g in groups.iter_mut() {
            if out.len() >= TOY_PAIRS {
                break;
            }
            if let Some(e) = g.pop() {
                if let Some(p) = pair_from_entry(e, &x) {
                    out.push(p);
                }
            }
        }
    }
    out
}
