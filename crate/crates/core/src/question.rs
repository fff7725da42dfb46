//! Question formulation, mention detection and rule-based classification.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::fact::{required_fields, FactType};
use crate::similarity::levenshtein;
use crate::table::{ColumnType, DataTable, GroupKey};
use crate::text::{is_stopword, tokenize, words};

/// Input length cap for serialized questions, in tokens.
pub const MAX_LEN: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionClass {
    #[serde(rename = "simple")]
    Simple,
    #[serde(rename = "type-i")]
    ComplexTypeI,
    #[serde(rename = "type-ii")]
    ComplexTypeII,
}

impl QuestionClass {
    pub fn is_complex(self) -> bool {
        self != QuestionClass::Simple
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionClass::Simple => "simple",
            QuestionClass::ComplexTypeI => "type-i",
            QuestionClass::ComplexTypeII => "type-ii",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaToken {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
}

impl SchemaToken {
    /// Single-token form: lowercase words joined by underscores.
    pub fn token(&self) -> String {
        words(&self.name).join("_")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MentionTarget {
    Column { column: String, #[serde(rename = "type")] column_type: ColumnType },
    Value { column: String, value: String },
}

impl MentionTarget {
    pub fn column(&self) -> &str {
        match self {
            MentionTarget::Column { column, .. } | MentionTarget::Value { column, .. } => column,
        }
    }
}

/// A token span `[start, end)` resolved to a column or a cell value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub target: MentionTarget,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulatedQuestion {
    pub text: String,
    pub tokens: Vec<String>,
    /// Byte span of each token in `text`.
    pub spans: Vec<(usize, usize)>,
    pub schema: Vec<SchemaToken>,
    pub mentions: Vec<Mention>,
}

impl FormulatedQuestion {
    /// Schema tokens grouped under their markers, numerical then temporal then categorical.
    pub fn schema_sequence(&self) -> Vec<String> {
        let mut out = Vec::new();
        for kind in [ColumnType::Numerical, ColumnType::Temporal, ColumnType::Categorical] {
            out.push(kind.marker().to_string());
            out.extend(self.schema.iter().filter(|s| s.kind == kind).map(SchemaToken::token));
        }
        out
    }

    /// Question words then schema tokens, at most [`MAX_LEN`] in total.
    ///
    /// Trailing question words are dropped first; schema tokens are never truncated.
    pub fn input_tokens(&self) -> Vec<String> {
        let schema = self.schema_sequence();
        let room = MAX_LEN.saturating_sub(schema.len());
        let mut out: Vec<String> = self.tokens.iter().take(room).cloned().collect();
        out.extend(schema);
        out
    }

    pub fn serialize(&self) -> String {
        self.input_tokens().join(" ")
    }

    pub fn columns_of(&self, kind: ColumnType) -> impl Iterator<Item = &SchemaToken> {
        self.schema.iter().filter(move |s| s.kind == kind)
    }

    pub fn kind_of(&self, column: &str) -> Option<ColumnType> {
        self.schema.iter().find(|s| s.name == column).map(|s| s.kind)
    }

    pub fn column_mentions(&self) -> impl Iterator<Item = (&Mention, &str, ColumnType)> {
        self.mentions.iter().filter_map(|m| match &m.target {
            MentionTarget::Column { column, column_type } => Some((m, column.as_str(), *column_type)),
            _ => None,
        })
    }

    pub fn value_mentions(&self) -> impl Iterator<Item = (&Mention, &str, &str)> {
        self.mentions.iter().filter_map(|m| match &m.target {
            MentionTarget::Value { column, value } => Some((m, column.as_str(), value.as_str())),
            _ => None,
        })
    }

    /// Columns mentioned by name, in order of appearance, without repeats.
    pub fn mentioned_columns(&self, kind: ColumnType) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, c, k) in self.column_mentions() {
            if k == kind && !out.iter().any(|o| o == c) {
                out.push(c.to_string());
            }
        }
        out
    }

    pub fn mention_at(&self, token: usize) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.start <= token && token < m.end)
    }

    pub fn has_token(&self, word: &str) -> bool {
        self.tokens.iter().any(|t| t == word)
    }

    /// Original text between two token indices (`end` exclusive).
    pub fn slice(&self, start: usize, end: usize) -> &str {
        if start >= end || end > self.spans.len() {
            return "";
        }
        &self.text[self.spans[start].0..self.spans[end - 1].1]
    }
}

struct Entry {
    words: Vec<String>,
    target: MentionTarget,
    priority: u8,
}

/// Words that never fuzzy-match a column or value.
const NO_FUZZ: &[&str] = &[
    "data", "table", "information", "value", "values", "number", "category", "categories", "kind",
    "kinds", "type", "types", "time", "group", "groups", "info", "details", "different", "item",
    "items", "list", "average", "mean", "much", "many", "like", "look", "make", "more", "less",
    "sell", "sold", "some", "have", "does", "with",
];

fn lexicon_words() -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    for (_, phrases) in FACT_LEXICON {
        for p in phrases.iter().filter(|p| !p.contains(' ')) {
            out.insert(p.trim_end_matches('*'));
        }
    }
    out
}

fn fuzzy_limit(len: usize) -> usize {
    if len <= 5 {
        1
    } else {
        2
    }
}

/// Tokenizes `q` and annotates it with the schema of `x` and any column or value mentions.
///
/// Mentions are matched greedily left to right, preferring the longest exact multi-token match
/// (column names before cell values), then a single-token fuzzy match within edit distance 2
/// for tokens of at least four characters.
pub fn formulate(q: &str, x: &DataTable) -> FormulatedQuestion {
    let toks = tokenize(q);
    let tokens: Vec<String> = toks.iter().map(|t| t.text.clone()).collect();
    let spans = toks.iter().map(|t| (t.start, t.end)).collect();
    let schema: Vec<SchemaToken> = x
        .columns()
        .iter()
        .map(|c| SchemaToken { name: c.name.clone(), kind: c.kind() })
        .collect();

    let mut entries: Vec<Entry> = Vec::new();
    for c in x.columns() {
        let name_words = words(&c.name);
        if name_words.is_empty() {
            continue;
        }
        let target = MentionTarget::Column { column: c.name.clone(), column_type: c.kind() };
        if name_words.len() > 1 {
            let last = name_words.last().cloned().unwrap_or_default();
            if !is_stopword(&last) {
                entries.push(Entry { words: vec![last], target: target.clone(), priority: 1 });
            }
        }
        entries.push(Entry { words: name_words, target, priority: 3 });
        if c.kind() != ColumnType::Numerical {
            for key in c.distinct_keys() {
                let value = key.to_string();
                let value_words = match key {
                    GroupKey::Time(t) if t.month == 0 => vec![t.year.to_string()],
                    _ => words(&value),
                };
                if value_words.is_empty() {
                    continue;
                }
                entries.push(Entry {
                    words: value_words,
                    target: MentionTarget::Value { column: c.name.clone(), value },
                    priority: 2,
                });
            }
        }
    }
    let lexicon = lexicon_words();

    let mut mentions = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let best = entries
            .iter()
            .filter(|e| e.words.len() <= tokens.len() - i && e.words[..] == tokens[i..i + e.words.len()])
            .max_by_key(|e| (e.words.len(), e.priority));
        if let Some(e) = best {
            let single_stop = e.words.len() == 1 && is_stopword(&e.words[0]);
            if !single_stop {
                mentions.push(Mention { start: i, end: i + e.words.len(), target: e.target.clone(), exact: true });
                i += e.words.len();
                continue;
            }
        }
        let tok = &tokens[i];
        let fuzzable = tok.chars().count() >= 4
            && !is_stopword(tok)
            && !NO_FUZZ.contains(&tok.as_str())
            && !lexicon.contains(tok.as_str());
        if fuzzable {
            let limit = fuzzy_limit(tok.chars().count());
            let hit = entries
                .iter()
                .filter(|e| e.words.len() == 1 && e.words[0].chars().count() >= 4)
                .map(|e| (levenshtein(tok, &e.words[0]), e))
                .filter(|(d, _)| *d <= limit)
                .min_by_key(|(d, e)| (*d, std::cmp::Reverse(e.priority)));
            if let Some((_, e)) = hit {
                mentions.push(Mention { start: i, end: i + 1, target: e.target.clone(), exact: false });
            }
        }
        i += 1;
    }
    FormulatedQuestion { text: q.to_string(), tokens, spans, schema, mentions }
}

/// Keyword lexicon per fact type. A trailing `*` matches any word with that prefix.
pub const FACT_LEXICON: &[(FactType, &[&str])] = &[
    (FactType::Trend, &[
        "trend", "trends", "over time", "change", "changes", "changed", "changing", "increasing",
        "decreasing", "growth", "grow", "growing", "over the years", "over years", "evolve*",
    ]),
    (FactType::Extreme, &[
        "highest", "lowest", "most", "least", "max", "min", "best", "worst", "largest", "smallest",
        "biggest", "top selling", "best selling", "sell a lot", "sells a lot",
    ]),
    (FactType::Distribution, &["distribution", "distributions", "spread", "distributed"]),
    (FactType::Proportion, &["proportion", "proportions", "percentage", "percent", "share", "fraction", "account for"]),
    (FactType::Rank, &[
        "rank", "ranks", "ranking", "ranked", "order", "top", "sort", "sorted", "than average",
        "above average", "below average",
    ]),
    (FactType::Association, &["correlat*", "relationship", "relationships", "related", "relation", "association"]),
    (FactType::Outlier, &["outlier*", "anomal*", "unusual", "abnormal"]),
    (FactType::Difference, &["difference", "differences", "compare", "compared", "versus", "vs", "gap", "differ"]),
    (FactType::Categorization, &["categories", "kinds", "types of", "what kinds", "categorize*"]),
    (FactType::Value, &["total", "how many", "how much", "overall", "sum"]),
];

/// Ties between equally scored types go to the earlier entry.
pub const FACT_PRIORITY: [FactType; 10] = [
    FactType::Extreme,
    FactType::Trend,
    FactType::Outlier,
    FactType::Rank,
    FactType::Proportion,
    FactType::Distribution,
    FactType::Association,
    FactType::Difference,
    FactType::Categorization,
    FactType::Value,
];

fn phrase_matches(phrase: &str, tokens: &[String], at: usize) -> usize {
    let parts: Vec<&str> = phrase.split(' ').collect();
    if at + parts.len() > tokens.len() {
        return 0;
    }
    for (k, p) in parts.iter().enumerate() {
        let t = &tokens[at + k];
        let ok = match p.strip_suffix('*') {
            Some(prefix) => t.starts_with(prefix),
            None => t == p,
        };
        if !ok {
            return 0;
        }
    }
    parts.len()
}

/// A lexicon hit: fact type and token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeywordHit {
    pub fact_type: FactType,
    pub start: usize,
    pub end: usize,
}

/// Every lexicon phrase occurrence in the token sequence.
pub fn keyword_hits(tokens: &[String]) -> Vec<KeywordHit> {
    let mut hits = Vec::new();
    for at in 0..tokens.len() {
        for (t, phrases) in FACT_LEXICON {
            for p in *phrases {
                let n = phrase_matches(p, tokens, at);
                if n > 0 && *t == FactType::Difference && relative_to_rest(tokens, at) {
                    continue;
                }
                if n > 0 {
                    hits.push(KeywordHit { fact_type: *t, start: at, end: at + n });
                }
            }
        }
    }
    hits
}

/// `compared with other books`: measuring against the rest, not a two-way difference.
fn relative_to_rest(tokens: &[String], at: usize) -> bool {
    tokens[at].starts_with("compar")
        && tokens.get(at + 1).is_some_and(|t| t == "with" || t == "to")
        && tokens
            .get(at + 2)
            .is_some_and(|t| matches!(t.as_str(), "other" | "others" | "rest" | "the"))
}

/// Hit counts per fact type, indexed like [`FactType::ALL`].
pub fn fact_type_scores(q: &str) -> [usize; 10] {
    let mut scores = [0; 10];
    for h in keyword_hits(&words(q)) {
        scores[h.fact_type.index()] += 1;
    }
    scores
}

/// Keyword-scored fact type of a simple question.
///
/// Value keywords only count when no other type is hit; no hits at all also means value.
pub fn classify_fact_type(q: &str) -> FactType {
    let scores = fact_type_scores(q);
    let best = FACT_PRIORITY
        .iter()
        .filter(|t| **t != FactType::Value)
        .max_by(|a, b| {
            scores[a.index()]
                .cmp(&scores[b.index()])
                .then_with(|| priority_of(**b).cmp(&priority_of(**a)))
        })
        .copied()
        .unwrap_or(FactType::Value);
    if scores[best.index()] > 0 {
        best
    } else {
        FactType::Value
    }
}

fn priority_of(t: FactType) -> usize {
    FACT_PRIORITY.iter().position(|p| *p == t).unwrap_or(usize::MAX)
}

/// Distinct non-value fact types named by keywords.
pub fn task_types(tokens: &[String]) -> BTreeSet<FactType> {
    keyword_hits(tokens)
        .into_iter()
        .map(|h| h.fact_type)
        .filter(|t| *t != FactType::Value)
        .collect()
}

/// Adjectives that imply a measure, with column-name fragments they map to.
pub const ADJECTIVES: &[(&str, &[&str], bool)] = &[
    ("expensive", &["price", "cost"], true),
    ("costly", &["price", "cost"], true),
    ("cheap", &["price", "cost"], false),
    ("affordable", &["price", "cost"], false),
    ("well regarded", &["review", "rating"], true),
    ("popular", &["review", "rating"], true),
    ("well rated", &["rating", "review"], true),
    ("acclaimed", &["rating", "review"], true),
    ("profitable", &["profit", "revenue"], true),
    ("sell a lot", &["sales", "revenue", "units"], true),
    ("sells a lot", &["sales", "revenue", "units"], true),
    ("best selling", &["sales", "revenue", "units"], true),
    ("busy", &["visits", "units"], true),
];

/// An adjective occurrence resolved to a numerical column.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjectiveHit {
    pub start: usize,
    pub end: usize,
    pub column: String,
    pub high: bool,
}

pub fn adjective_hits(fq: &FormulatedQuestion) -> Vec<AdjectiveHit> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < fq.tokens.len() {
        let mut advanced = false;
        for (phrase, fragments, high) in ADJECTIVES {
            let n = phrase_matches(phrase, &fq.tokens, at);
            if n == 0 {
                continue;
            }
            let column = fragments.iter().find_map(|frag| {
                fq.columns_of(ColumnType::Numerical)
                    .find(|s| s.name.to_lowercase().contains(frag))
                    .map(|s| s.name.clone())
            });
            if let Some(column) = column {
                out.push(AdjectiveHit { start: at, end: at + n, column, high: *high });
                at += n;
                advanced = true;
                break;
            }
        }
        if !advanced {
            at += 1;
        }
    }
    out
}

/// Words that stand in for "some breakdown" without naming a column.
pub const GENERIC_BREAKDOWN: &[&str] = &["category", "categories", "group", "groups", "kind", "kinds", "time"];

/// Words that open a new clause after `and`.
const CLAUSE_STARTERS: &[&str] = &[
    "which", "what", "how", "who", "when", "where", "is", "are", "does", "do", "did", "has", "have",
    "show", "tell", "give", "list", "rank", "compare",
];

/// Position of a conjunctive `and` that joins two clauses rather than two mentions, if any.
///
/// An `and` is a plain list separator when a mention ends at most one token before it and
/// another starts at most two tokens after it (`between price and the reviews`).
pub fn conjunctive_and(fq: &FormulatedQuestion) -> Option<usize> {
    let adjs = adjective_hits(fq);
    (1..fq.tokens.len().saturating_sub(1)).find(|&i| {
        if fq.tokens[i] != "and" {
            return false;
        }
        if fq.tokens.get(i + 1).is_some_and(|t| CLAUSE_STARTERS.contains(&t.as_str())) {
            return true;
        }
        let before = fq.mentions.iter().any(|m| m.end <= i && m.end + 1 >= i);
        let after = fq.mentions.iter().any(|m| m.start > i && m.start <= i + 2);
        let adj_pair = adjs.iter().any(|a| a.end == i) && adjs.iter().any(|a| a.start == i + 1);
        !(before && after) || adj_pair
    })
}

/// `compare ... A and B ...` where A and B are mentions.
pub fn compare_frame(fq: &FormulatedQuestion) -> bool {
    let Some(c) = fq.tokens.iter().position(|t| t.starts_with("compar")) else {
        return false;
    };
    let after: Vec<&Mention> = fq.mentions.iter().filter(|m| m.start > c).collect();
    after.len() >= 2
        && fq.tokens[c..]
            .iter()
            .any(|t| matches!(t.as_str(), "and" | "with" | "versus" | "vs" | "against"))
}

/// Token index where the main question of an `in the X with ..., what ...` frame starts.
pub fn bridging_frame(fq: &FormulatedQuestion) -> Option<usize> {
    let first = fq.tokens.first()?;
    if !matches!(first.as_str(), "in" | "for" | "among" | "within") {
        return None;
    }
    let comma = fq.text.find(',')?;
    let split = fq.spans.iter().position(|&(s, _)| s > comma)?;
    let head = &fq.tokens[..split];
    let linked = head
        .iter()
        .any(|t| matches!(t.as_str(), "with" | "has" | "having" | "had" | "where" | "whose"));
    let superlative = keyword_hits(head).iter().any(|h| h.fact_type == FactType::Extreme);
    let tail_question = fq.tokens[split..]
        .first()
        .is_some_and(|t| matches!(t.as_str(), "what" | "which" | "how" | "who" | "show" | "is" | "are"));
    (linked && superlative && tail_question).then_some(split)
}

/// True when the question fills the measure slot: a numerical column mention, an adjective
/// mapping to one, or a table with a single numerical column.
pub fn has_measure(fq: &FormulatedQuestion) -> bool {
    fq.column_mentions().any(|(_, _, k)| k == ColumnType::Numerical)
        || !adjective_hits(fq).is_empty()
        || fq.columns_of(ColumnType::Numerical).count() == 1
}

/// True when the breakdown slot a fact type needs is filled.
pub fn has_breakdown(fq: &FormulatedQuestion, t: FactType) -> bool {
    let rule = required_fields(t).breakdown;
    if !rule.required() {
        return true;
    }
    if fq.column_mentions().any(|(_, _, k)| rule.admits(k)) {
        return true;
    }
    if fq.tokens.iter().any(|w| GENERIC_BREAKDOWN.contains(&w.as_str())) {
        return true;
    }
    // A named focus value ("does A4 account for") implies its column.
    if required_fields(t).focus.required()
        && fq.value_mentions().any(|(_, col, _)| fq.kind_of(col).is_some_and(|k| rule.admits(k)))
    {
        return true;
    }
    if t == FactType::Trend && keyword_hits(&fq.tokens).iter().any(|h| h.fact_type == FactType::Trend) {
        // "trend" alone implies time when the table has exactly one temporal column.
        if fq.columns_of(ColumnType::Temporal).count() == 1 {
            return true;
        }
    }
    fq.schema.iter().filter(|s| rule.admits(s.kind)).count() == 1
}

/// Rule-based three-way complexity decision.
///
/// Type-I: two or more distinct task types, a conjunctive `and`, a compare frame, or a bridging
/// frame. Type-II: no task keyword at all, or a required measure or breakdown left unstated.
/// Otherwise simple.
pub fn classify_complexity(fq: &FormulatedQuestion) -> QuestionClass {
    let tasks = task_types(&fq.tokens);
    if tasks.len() >= 2 || conjunctive_and(fq).is_some() || compare_frame(fq) || bridging_frame(fq).is_some() {
        return QuestionClass::ComplexTypeI;
    }
    if keyword_hits(&fq.tokens).is_empty() {
        return QuestionClass::ComplexTypeII;
    }
    let t = classify_fact_type(&fq.text);
    let needs_measure = required_fields(t).measures > 0;
    if (needs_measure && !has_measure(fq)) || !has_breakdown(fq, t) {
        return QuestionClass::ComplexTypeII;
    }
    QuestionClass::Simple
}

/// Plug-in seam for complexity classification.
pub trait ComplexityClassifier: Send + Sync {
    fn classify(&self, fq: &FormulatedQuestion) -> QuestionClass;
}

/// Plug-in seam for fact-type classification of simple questions.
pub trait FactTypeClassifier: Send + Sync {
    fn classify(&self, q: &str) -> FactType;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

impl ComplexityClassifier for RuleClassifier {
    fn classify(&self, fq: &FormulatedQuestion) -> QuestionClass {
        classify_complexity(fq)
    }
}

impl FactTypeClassifier for RuleClassifier {
    fn classify(&self, q: &str) -> FactType {
        classify_fact_type(q)
    }
}
