//! Token vocabulary with the reserved markers.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const SPECIALS: [&str; 6] = [SOS, EOS, UNK, "<N>", "<T>", "<C>"];
pub const SOS_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const UNK_ID: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Vocab {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Vec<String> {
        v.words
    }
}

impl Vocab {
    /// Markers first, then every distinct word in sorted order.
    pub fn build<I, S>(tokens: I) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut rest = BTreeSet::new();
        for t in tokens {
            let t = t.as_ref();
            if !SPECIALS.contains(&t) {
                rest.insert(t.to_string());
            }
        }
        let words: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).chain(rest).collect();
        Vocab::from(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// True when the markers occupy their fixed ids.
    pub fn has_markers(&self) -> bool {
        SPECIALS.iter().enumerate().all(|(i, s)| self.words.get(i).map(String::as_str) == Some(*s))
    }

    pub fn unk(&self) -> usize {
        UNK_ID
    }
}

/// A source sequence mapped onto the vocabulary, with out-of-vocabulary words given
/// extended ids `V + k` in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMap {
    /// Embedding ids; OOV words map to `<unk>`.
    pub ids: Vec<usize>,
    /// Extended ids used by the copy distribution.
    pub ext: Vec<usize>,
    pub oov: Vec<String>,
}

impl SourceMap {
    pub fn new(tokens: &[String], v: &Vocab) -> SourceMap {
        let mut oov: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(tokens.len());
        let mut ext = Vec::with_capacity(tokens.len());
        for t in tokens {
            match v.id(t) {
                Some(i) => {
                    ids.push(i);
                    ext.push(i);
                }
                None => {
                    let k = oov.iter().position(|o| o == t).unwrap_or_else(|| {
                        oov.push(t.clone());
                        oov.len() - 1
                    });
                    ids.push(v.unk());
                    ext.push(v.len() + k);
                }
            }
        }
        SourceMap { ids, ext, oov }
    }

    /// Extended id of a target word: in-vocabulary id, else its source OOV slot, else `<unk>`.
    pub fn target_id(&self, w: &str, v: &Vocab) -> usize {
        v.id(w)
            .or_else(|| self.oov.iter().position(|o| o == w).map(|k| v.len() + k))
            .unwrap_or_else(|| v.unk())
    }

    pub fn word<'a>(&'a self, id: usize, v: &'a Vocab) -> &'a str {
        if id < v.len() {
            v.word(id).unwrap_or(UNK)
        } else {
            self.oov.get(id - v.len()).map(String::as_str).unwrap_or(UNK)
        }
    }

    pub fn ext_size(&self, v: &Vocab) -> usize {
        v.len() + self.oov.len()
    }
}
