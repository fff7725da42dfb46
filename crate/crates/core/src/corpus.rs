//! Seeded generation of complex-question corpora from fact combinations, and pair validation.

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::sync::OnceLock;

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::IDENTIFIER_CARDINALITY;
use crate::fact::{argmax, validate_shape, Agg, DataFact, FactType, Measure};
use crate::question::{classify_complexity, formulate, QuestionClass};
use crate::render::fact_to_question;
use crate::similarity::{combined_score, ProviderError, SimilarityProvider};
use crate::table::{group_and_aggregate, ColumnType, DataTable, Filter, Subspace};
use crate::text::words;

pub const CORPUS_VERSION: u32 = 1;
/// Entries kept per (table, method).
pub const DEFAULT_PER_METHOD: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Comparison,
    Intersection,
    Bridging,
    NoFactType,
    NoMeasure,
    NoBreakdown,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Comparison,
        Method::Intersection,
        Method::Bridging,
        Method::NoFactType,
        Method::NoMeasure,
        Method::NoBreakdown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Comparison => "comparison",
            Method::Intersection => "intersection",
            Method::Bridging => "bridging",
            Method::NoFactType => "no-fact-type",
            Method::NoMeasure => "no-measure",
            Method::NoBreakdown => "no-breakdown",
        }
    }

    pub fn class(self) -> QuestionClass {
        match self {
            Method::Comparison | Method::Intersection | Method::Bridging => QuestionClass::ComplexTypeI,
            _ => QuestionClass::ComplexTypeII,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub table_id: String,
    pub complex_question: String,
    pub method: Method,
    pub sub_questions: Vec<String>,
    pub facts: Vec<DataFact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub version: u32,
    pub seed: u64,
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub entries: Vec<CorpusEntry>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus has no header line")]
    MissingHeader,
}

impl Corpus {
    /// Header record, then one entry per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Corpus, CorpusError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(CorpusError::MissingHeader)?;
        let header: CorpusHeader =
            serde_json::from_str(first).map_err(|e| CorpusError::Parse { line: 1, message: e.to_string() })?;
        let entries = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() }))
            .collect::<Result<_, _>>()?;
        Ok(Corpus { header, entries })
    }

    pub fn count(&self, class: QuestionClass) -> usize {
        self.entries.iter().filter(|e| e.method.class() == class).count()
    }
}

/// Question templates, loaded from the bundled data file.
#[derive(Debug, Clone, Deserialize)]
pub struct Templates {
    pub version: u32,
    pub comparison: Vec<String>,
    pub comparison_clauses: BTreeMap<String, String>,
    pub intersection: Vec<String>,
    pub bridging: Vec<String>,
    #[serde(rename = "no-fact-type")]
    pub no_fact_type: Vec<String>,
    #[serde(rename = "no-measure")]
    pub no_measure: BTreeMap<String, Vec<String>>,
    #[serde(rename = "no-breakdown")]
    pub no_breakdown: BTreeMap<String, Vec<String>>,
    pub synonyms: Vec<(String, String)>,
}

pub const TEMPLATES_JSON: &str = include_str!("../data/templates.json");

pub fn templates() -> &'static Templates {
    static T: OnceLock<Templates> = OnceLock::new();
    T.get_or_init(|| serde_json::from_str(TEMPLATES_JSON).expect("bundled templates parse"))
}

pub type FactPair = (DataFact, DataFact);

struct Columns {
    numeric: Vec<String>,
    categorical: Vec<String>,
    temporal: Vec<String>,
}

impl Columns {
    fn of(x: &DataTable) -> Columns {
        let names = |k: ColumnType| -> Vec<String> {
            x.columns()
                .iter()
                .filter(|c| c.kind() == k)
                .filter(|c| k != ColumnType::Categorical || (2..=IDENTIFIER_CARDINALITY).contains(&c.cardinality()))
                .map(|c| c.name.clone())
                .collect()
        };
        Columns {
            numeric: names(ColumnType::Numerical),
            categorical: names(ColumnType::Categorical),
            temporal: names(ColumnType::Temporal),
        }
    }

    fn breakdowns(&self) -> Vec<String> {
        self.temporal.iter().chain(&self.categorical).cloned().collect()
    }

    fn for_type(&self, t: FactType) -> Vec<String> {
        match t {
            FactType::Trend => self.temporal.clone(),
            FactType::Proportion | FactType::Categorization => self.categorical.clone(),
            _ => self.breakdowns(),
        }
    }
}

fn pairs<T: Clone>(items: &[T]) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            out.push((items[i].clone(), items[j].clone()));
        }
    }
    out
}

fn simple_fact(t: FactType, m: &str, bd: Option<&str>) -> DataFact {
    let mut f = DataFact::new(t).with_measure(Measure::new(m, Agg::Sum));
    f.breakdown = bd.map(str::to_string);
    f
}

/// Extreme fact over `bd` with its winner as focus.
fn winner_fact(x: &DataTable, m: &str, bd: &str) -> Option<DataFact> {
    let groups = group_and_aggregate(x, &Subspace::all(), Some(bd), Some(&Measure::new(m, Agg::Sum))).ok()?;
    let w = argmax(&groups)?.key.clone();
    Some(simple_fact(FactType::Extreme, m, Some(bd)).with_focus([w]))
}

/// Fact pairs that a method can combine into one complex question.
pub fn enumerate_combos(x: &DataTable, method: Method) -> Vec<FactPair> {
    let cols = Columns::of(x);
    let mut out = Vec::new();
    match method {
        Method::Comparison => {
            for c in &cols.categorical {
                let values: Vec<String> = x
                    .column(c)
                    .map(|col| col.distinct_keys().iter().map(ToString::to_string).collect())
                    .unwrap_or_default();
                for (a, b) in pairs(&values[..values.len().min(4)]) {
                    for t in [FactType::Rank, FactType::Trend, FactType::Extreme, FactType::Distribution, FactType::Value] {
                        for m in &cols.numeric {
                            let bds: Vec<Option<String>> = if t == FactType::Value {
                                vec![None]
                            } else {
                                cols.for_type(t).into_iter().filter(|b| b != c).map(Some).collect()
                            };
                            for bd in bds {
                                let f = simple_fact(t, m, bd.as_deref());
                                out.push((
                                    f.clone().with_subspace(Subspace::of(vec![Filter::equals(c.as_str(), a.as_str())])),
                                    f.with_subspace(Subspace::of(vec![Filter::equals(c.as_str(), b.as_str())])),
                                ));
                            }
                        }
                    }
                }
            }
        }
        Method::Intersection => {
            for e in cols.breakdowns() {
                for (m1, m2) in pairs(&cols.numeric) {
                    if let (Some(a), Some(b)) = (winner_fact(x, &m1, &e), winner_fact(x, &m2, &e)) {
                        out.push((a, b));
                    }
                }
            }
        }
        Method::Bridging => {
            for b in cols.breakdowns() {
                for m1 in &cols.numeric {
                    let Some(first) = winner_fact(x, m1, &b) else { continue };
                    let bound = Subspace::of(vec![Filter::equals(b.as_str(), first.focus[0].as_str())]);
                    for t in [FactType::Distribution, FactType::Extreme, FactType::Trend, FactType::Rank, FactType::Value] {
                        for m2 in &cols.numeric {
                            let bds: Vec<Option<String>> = if t == FactType::Value {
                                vec![None]
                            } else {
                                cols.for_type(t).into_iter().filter(|c| c != &b).map(Some).collect()
                            };
                            for bd in bds {
                                out.push((first.clone(), simple_fact(t, m2, bd.as_deref()).with_subspace(bound.clone())));
                            }
                        }
                    }
                }
            }
        }
        Method::NoFactType => {
            for m in &cols.numeric {
                for bd in cols.breakdowns() {
                    let types: &[FactType] = if cols.temporal.contains(&bd) {
                        &[FactType::Trend, FactType::Extreme, FactType::Distribution, FactType::Difference]
                    } else {
                        &[FactType::Difference, FactType::Extreme, FactType::Distribution, FactType::Rank, FactType::Proportion]
                    };
                    for (t1, t2) in pairs(types) {
                        out.push((simple_fact(t1, m, Some(&bd)), simple_fact(t2, m, Some(&bd))));
                    }
                }
            }
        }
        Method::NoMeasure => {
            for t in [FactType::Outlier, FactType::Extreme, FactType::Trend, FactType::Distribution, FactType::Rank] {
                for bd in cols.for_type(t) {
                    for (m1, m2) in pairs(&cols.numeric) {
                        out.push((simple_fact(t, &m1, Some(&bd)), simple_fact(t, &m2, Some(&bd))));
                    }
                }
            }
        }
        Method::NoBreakdown => {
            for t in [FactType::Outlier, FactType::Extreme, FactType::Distribution, FactType::Rank, FactType::Difference] {
                for m in &cols.numeric {
                    for (b1, b2) in pairs(&cols.for_type(t)) {
                        out.push((simple_fact(t, m, Some(&b1)), simple_fact(t, m, Some(&b2))));
                    }
                }
            }
        }
    }
    out.retain(|(a, b)| validate_shape(a, x).is_empty() && validate_shape(b, x).is_empty());
    out
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in slots {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Templates a method offers for a fact pair.
pub fn template_options(pair: &FactPair, method: Method) -> &'static [String] {
    let tpl = templates();
    let t = pair.0.fact_type.as_str();
    match method {
        Method::Comparison => &tpl.comparison,
        Method::Intersection => &tpl.intersection,
        Method::Bridging => &tpl.bridging,
        Method::NoFactType => &tpl.no_fact_type,
        Method::NoMeasure => tpl.no_measure.get(t).map_or(&[], Vec::as_slice),
        Method::NoBreakdown => tpl.no_breakdown.get(t).map_or(&[], Vec::as_slice),
    }
}

fn question(f: &DataFact) -> String {
    fact_to_question(f, true).unwrap_or_default()
}

fn without_subspace(f: &DataFact) -> DataFact {
    let mut g = f.clone();
    g.subspace = Subspace::all();
    g
}

fn measure_name(f: &DataFact) -> String {
    f.measure.first().map(|m| m.column.to_lowercase()).unwrap_or_default()
}

fn breakdown_name(f: &DataFact) -> String {
    f.breakdown.clone().unwrap_or_default().to_lowercase()
}

/// Renders a fact pair as a complex question with its two sub-questions; the template is
/// drawn from `rng`.
pub fn render_complex<R: Rng>(table_id: &str, pair: &FactPair, method: Method, rng: &mut R) -> CorpusEntry {
    let n = template_options(pair, method).len().max(1);
    render_with(table_id, pair, method, rng.random_range(0..n))
}

/// Renders a fact pair with the method's `index`-th template (wrapping).
pub fn render_with(table_id: &str, pair: &FactPair, method: Method, index: usize) -> CorpusEntry {
    let tpl = templates();
    let options = template_options(pair, method);
    let template = options.get(index % options.len().max(1)).map_or("", String::as_str);
    let (a, b) = pair;
    let m = measure_name(a);
    let bd = breakdown_name(a);
    let (complex, subs) = match method {
        Method::Comparison => {
            let value = |f: &DataFact| match &f.subspace.filters.first().map(|x| &x.predicate) {
                Some(crate::table::Predicate::Equals(v)) => v.clone(),
                _ => String::new(),
            };
            let clause = fill(&tpl.comparison_clauses[a.fact_type.as_str()], &[("m", &m), ("bd", &bd)]);
            let text = fill(template, &[
                ("a", &value(a)),
                ("b", &value(b)),
                ("clause", &clause),
                ("Clause", &capitalize(&clause)),
            ]);
            (text, vec![question(a), question(b)])
        }
        Method::Intersection => {
            let text = fill(template, &[("x", &bd), ("m1", &m), ("m2", &measure_name(b))]);
            (text, vec![question(a), question(b)])
        }
        Method::Bridging => {
            let q2 = question(&without_subspace(b));
            let text = fill(template, &[("b", &bd), ("m1", &m), ("q2", &q2)]);
            (text, vec![question(a), q2])
        }
        Method::NoFactType => {
            (fill(template, &[("m", &m), ("bd", &bd)]), vec![question(a), question(b)])
        }
        Method::NoMeasure => {
            let text = fill(template, &[("bd", &bd)]);
            (text, vec![question(a), question(b)])
        }
        Method::NoBreakdown => {
            let text = fill(template, &[("m", &m)]);
            (text, vec![question(a), question(b)])
        }
    };
    CorpusEntry {
        table_id: table_id.to_string(),
        complex_question: complex,
        method,
        sub_questions: subs,
        facts: vec![a.clone(), b.clone()],
    }
}

/// Seeded synonym swaps standing in for human rephrasing.
pub fn perturb<R: Rng>(text: &str, rng: &mut R) -> String {
    let mut s = text.to_string();
    for (from, to) in &templates().synonyms {
        if s.contains(from.as_str()) && rng.random_bool(0.3) {
            s = s.replacen(from.as_str(), to, 1);
        }
    }
    s
}

/// Reasons an entry fails its own classification contract; empty when it is consistent.
pub fn entry_violations(e: &CorpusEntry, x: &DataTable) -> Vec<String> {
    let mut v = Vec::new();
    let class = classify_complexity(&formulate(&e.complex_question, x));
    if class != e.method.class() {
        v.push(format!("complex question classifies {}, expected {}", class.as_str(), e.method.class().as_str()));
    }
    if e.sub_questions.len() != 2 {
        v.push(format!("{} sub-questions", e.sub_questions.len()));
    }
    for q in &e.sub_questions {
        let c = classify_complexity(&formulate(q, x));
        if c != QuestionClass::Simple {
            v.push(format!("sub-question '{q}' classifies {}", c.as_str()));
        }
    }
    v
}

fn stream_seed(seed: u64, table_id: &str, method: Method) -> u64 {
    let mut h = FnvHasher::default();
    h.write(table_id.as_bytes());
    h.write(method.as_str().as_bytes());
    seed ^ h.finish()
}

/// Generates a corpus over `tables`, ordered by (table id, method, index).
///
/// Entries that would break their own classification contract are dropped; a perturbed
/// question that does so falls back to its template form.
pub fn generate(tables: &[DataTable], seed: u64, per_method: usize) -> Corpus {
    let mut sorted: Vec<&DataTable> = tables.iter().collect();
    sorted.sort_by(|a, b| a.name().cmp(b.name()));
    let mut entries = Vec::new();
    for x in &sorted {
        for method in Method::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, x.name(), method));
            let mut combos = enumerate_combos(x, method);
            combos.shuffle(&mut rng);
            let mut kept = 0;
            'combos: for pair in &combos {
                for i in 0..template_options(pair, method).len() {
                    if kept >= per_method {
                        break 'combos;
                    }
                    let mut e = render_with(x.name(), pair, method, i);
                    let plain = e.complex_question.clone();
                    e.complex_question = perturb(&plain, &mut rng);
                    if !entry_violations(&e, x).is_empty() {
                        e.complex_question = plain;
                    }
                    if entry_violations(&e, x).is_empty() && e.sub_questions[0] != e.sub_questions[1] {
                        entries.push(e);
                        kept += 1;
                    }
                }
            }
        }
    }
    Corpus {
        header: CorpusHeader {
            version: CORPUS_VERSION,
            seed,
            tables: sorted.iter().map(|x| x.name().to_string()).collect(),
        },
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    Copy,
    TooShort,
    MeaningChanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Reject(Rejection),
}

pub const MIN_WORDS: usize = 3;

/// Accepts a rephrasing `q_r` of `q_m` when it has at least three words and a strictly
/// positive combined score.
pub fn validate_pair(q_m: &str, q_r: &str, p: &dyn SimilarityProvider) -> Result<Verdict, ProviderError> {
    if q_m == q_r {
        return Ok(Verdict::Reject(Rejection::Copy));
    }
    if words(q_r).len() < MIN_WORDS {
        return Ok(Verdict::Reject(Rejection::TooShort));
    }
    let s = combined_score(q_m, q_r, p)?;
    Ok(if s > 0.0 { Verdict::Accept } else { Verdict::Reject(Rejection::MeaningChanged) })
}
