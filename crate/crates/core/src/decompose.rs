//! Iterative question decomposition with a rule-based reference backend.
//!
//! [`resolve`] classifies a question, asks a [`Decomposer`] to split complex ones into two
//! sub-questions and recurses until every leaf is simple or the depth bound is reached.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact::{required_fields, DataFact, FactType, Measure};
use crate::question::{
    adjective_hits, bridging_frame, classify_fact_type, compare_frame, conjunctive_and,
    formulate, has_breakdown, has_measure, keyword_hits, task_types, ComplexityClassifier,
    FormulatedQuestion, MentionTarget, QuestionClass, RuleClassifier,
};
use crate::render::fact_to_question;
use crate::search::admissible_aggs;
use crate::similarity::{ProviderError, SimilarityProvider};
use crate::table::{ColumnType, DataTable, Filter, Subspace};
use crate::text::normalize_question;

pub const DEFAULT_MAX_DEPTH: usize = 3;
/// Cap on enumerated fills before ranking a Type-II split.
pub const CANDIDATE_CAP: usize = 24;
/// Breakdown columns with more distinct values than this are treated as identifiers.
pub const IDENTIFIER_CARDINALITY: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("no decomposition frame matched")]
    Frame,
    #[error("cannot decompose: {}", .0.join("; "))]
    Unsatisfiable(Vec<String>),
    #[error("{0} questions are not decomposed")]
    Simple(&'static str),
    #[error("backend failed: {0}")]
    Backend(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Splits one complex question into exactly two sub-questions.
pub trait Decomposer: Send + Sync {
    fn name(&self) -> &str;

    fn decompose(
        &self,
        fq: &FormulatedQuestion,
        class: QuestionClass,
        x: &DataTable,
        provider: &dyn SimilarityProvider,
    ) -> Result<(String, String), DecomposeError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTree {
    pub question: String,
    pub class: QuestionClass,
    /// Backend that split this node; absent on leaves.
    pub backend: Option<String>,
    /// Set on leaves cut off by the depth bound.
    pub forced: bool,
    pub children: Vec<DecompositionTree>,
}

impl DecompositionTree {
    pub fn leaf(question: impl Into<String>, class: QuestionClass, forced: bool) -> DecompositionTree {
        DecompositionTree { question: question.into(), class, backend: None, forced, children: Vec::new() }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.children.iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Leaves in left-to-right order, without repeats under [`normalize_question`].
    pub fn leaves(&self) -> Vec<&DecompositionTree> {
        let mut all = Vec::new();
        self.collect(&mut all);
        let mut seen = HashSet::new();
        all.into_iter().filter(|l| seen.insert(normalize_question(&l.question))).collect()
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a DecompositionTree>) {
        if self.is_leaf() {
            out.push(self);
        }
        for c in &self.children {
            c.collect(out);
        }
    }
}

#[derive(Clone, Copy)]
pub struct ResolveOptions<'a> {
    pub max_depth: usize,
    pub classifier: &'a dyn ComplexityClassifier,
}

impl Default for ResolveOptions<'_> {
    fn default() -> Self {
        ResolveOptions { max_depth: DEFAULT_MAX_DEPTH, classifier: &RuleClassifier }
    }
}

/// Builds the decomposition tree for `q`.
///
/// A failing backend falls back to the rule backend; if both fail the error is returned.
pub fn resolve(
    q: &str,
    x: &DataTable,
    backend: &dyn Decomposer,
    provider: &dyn SimilarityProvider,
    opts: ResolveOptions,
) -> Result<DecompositionTree, DecomposeError> {
    resolve_node(q.trim(), x, backend, provider, opts, 0)
}

fn resolve_node(
    q: &str,
    x: &DataTable,
    backend: &dyn Decomposer,
    provider: &dyn SimilarityProvider,
    opts: ResolveOptions,
    depth: usize,
) -> Result<DecompositionTree, DecomposeError> {
    let fq = formulate(q, x);
    let class = opts.classifier.classify(&fq);
    if class == QuestionClass::Simple {
        return Ok(DecompositionTree::leaf(q, class, false));
    }
    if depth >= opts.max_depth.max(1) {
        return Ok(DecompositionTree::leaf(q, class, true));
    }
    let (used, (q1, q2)) = match backend.decompose(&fq, class, x, provider) {
        Ok(pair) => (backend.name().to_string(), pair),
        Err(first) => {
            let rule = RuleDecomposer;
            if backend.name() == rule.name() {
                return Err(first);
            }
            (rule.name().to_string(), rule.decompose(&fq, class, x, provider)?)
        }
    };
    let children = vec![
        resolve_node(&q1, x, backend, provider, opts, depth + 1)?,
        resolve_node(&q2, x, backend, provider, opts, depth + 1)?,
    ];
    Ok(DecompositionTree { question: q.to_string(), class, backend: Some(used), forced: false, children })
}

/// Surface-pattern decomposer over the mention-annotated token stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleDecomposer;

impl Decomposer for RuleDecomposer {
    fn name(&self) -> &str {
        "rule"
    }

    fn decompose(
        &self,
        fq: &FormulatedQuestion,
        class: QuestionClass,
        x: &DataTable,
        provider: &dyn SimilarityProvider,
    ) -> Result<(String, String), DecomposeError> {
        match class {
            QuestionClass::Simple => Err(DecomposeError::Simple("simple")),
            QuestionClass::ComplexTypeI => match decompose_type1(fq, x) {
                Err(DecomposeError::Frame) => decompose_type2(fq, x, provider),
                other => other,
            },
            QuestionClass::ComplexTypeII => decompose_type2(fq, x, provider),
        }
    }
}

const CUES: &[&str] = &["which", "over", "by", "per", "each", "different", "across", "between", "among", "for"];
const ENTITY_LEADS: &[&str] = &["which", "what", "any", "each", "every", "whose"];

fn column_kind(x: &DataTable, name: &str) -> Option<ColumnType> {
    x.column(name).map(|c| c.kind())
}

/// Numerical columns mentioned within `[start, end)`, in order.
fn measures_in(fq: &FormulatedQuestion, start: usize, end: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (m, c, k) in fq.column_mentions() {
        if k == ColumnType::Numerical && m.start >= start && m.end <= end && !out.iter().any(|o| o == c) {
            out.push(c.to_string());
        }
    }
    out
}

/// Best breakdown mention in `[start, end)` admitted by `t`, preferring one led by a cue word.
fn breakdown_in(fq: &FormulatedQuestion, start: usize, end: usize, t: FactType, exclude: Option<&str>) -> Option<(usize, String)> {
    let rule = required_fields(t).breakdown;
    let cands: Vec<(usize, &str)> = fq
        .column_mentions()
        .filter(|(m, c, k)| {
            m.start >= start && m.end <= end && *k != ColumnType::Numerical && (rule.admits(*k) || !rule.required())
                && exclude.map_or(true, |e| e != *c)
        })
        .map(|(m, c, _)| (m.start, c))
        .collect();
    let cued = cands.iter().find(|(s, _)| {
        (s.saturating_sub(2)..*s).any(|i| CUES.contains(&fq.tokens[i].as_str()))
    });
    cued.or(cands.first()).map(|(s, c)| (*s, c.to_string()))
}

/// Column named right after a wh-word or quantifier, e.g. `book` in `which book ...`.
fn entity(fq: &FormulatedQuestion) -> Option<(usize, String)> {
    fq.column_mentions()
        .filter(|(_, _, k)| *k != ColumnType::Numerical)
        .find(|(m, _, _)| {
            (m.start.saturating_sub(2)..m.start).any(|i| ENTITY_LEADS.contains(&fq.tokens[i].as_str()))
        })
        .map(|(m, c, _)| (m.start, c.to_string()))
}

fn default_measure(fq: &FormulatedQuestion, q: &str) -> Option<Measure> {
    let agg = admissible_aggs(q)[0];
    measures_in(fq, 0, fq.tokens.len())
        .into_iter()
        .next()
        .or_else(|| adjective_hits(fq).into_iter().next().map(|a| a.column))
        .or_else(|| fq.columns_of(ColumnType::Numerical).next().map(|s| s.name.clone()))
        .map(|c| Measure::new(c, agg))
}

fn render(f: &DataFact) -> String {
    fact_to_question(f, true).unwrap_or_default()
}

/// Replaces the first occurrence of the breakdown name with the user's own phrase for it.
fn with_phrase(question: String, breakdown: &str, phrase: Option<&str>) -> String {
    match phrase {
        Some(p) if !p.is_empty() => {
            let needle = format!(" {} ", breakdown.to_lowercase());
            question.replacen(&needle, &format!(" {} ", p.to_lowercase()), 1)
        }
        _ => question,
    }
}

/// The user's phrase for the breakdown at token `at`, extended over a trailing `of <mention>`.
fn breakdown_phrase(fq: &FormulatedQuestion, at: usize) -> Option<String> {
    let m = fq.mention_at(at)?;
    let mut end = m.end;
    if fq.tokens.get(end).is_some_and(|t| t == "of") {
        let next = if fq.tokens.get(end + 1).is_some_and(|t| t == "the") { end + 2 } else { end + 1 };
        if let Some(n) = fq.mention_at(next) {
            end = n.end;
        }
    }
    (end > m.end).then(|| fq.tokens[m.start..end].join(" "))
}

/// Splits a Type-I question along its bridging, comparison or conjunction frame.
pub fn decompose_type1(fq: &FormulatedQuestion, x: &DataTable) -> Result<(String, String), DecomposeError> {
    if let Some(split) = bridging_frame(fq) {
        return bridging(fq, x, split);
    }
    if compare_frame(fq) {
        if let Some(pair) = comparison(fq, x) {
            return Ok(pair);
        }
    }
    if let Some(at) = conjunctive_and(fq) {
        return conjunction(fq, x, at);
    }
    Err(DecomposeError::Frame)
}

fn superlative_side(tokens: &[String]) -> &'static str {
    if tokens.iter().any(|t| matches!(t.as_str(), "least" | "lowest" | "fewest" | "worst" | "smallest" | "min")) {
        "lowest"
    } else {
        "highest"
    }
}

fn bridging(fq: &FormulatedQuestion, x: &DataTable, split: usize) -> Result<(String, String), DecomposeError> {
    let head_measure = measures_in(fq, 0, split).into_iter().next();
    let head_bd = breakdown_in(fq, 0, split, FactType::Extreme, None).map(|(_, c)| c);
    let (Some(m), Some(bd)) = (head_measure, head_bd) else {
        return Err(DecomposeError::Frame);
    };
    let agg = admissible_aggs(&fq.slice(0, split).to_string())[0];
    let q1 = format!(
        "which {} has the {} {}?",
        bd.to_lowercase(),
        superlative_side(&fq.tokens[..split]),
        crate::render::measure_phrase(&Measure::new(m, agg))
    );
    let tail_text = fq.slice(split, fq.tokens.len()).to_string();
    let q2 = rephrase_clause(&tail_text, x).unwrap_or_else(|| question_mark(&tail_text));
    Ok((q1, q2))
}

fn question_mark(text: &str) -> String {
    let t = text.trim().trim_end_matches(['?', '.', '!', ',']).trim();
    format!("{t}?")
}

/// Re-renders a single-task clause through the question templates.
fn rephrase_clause(text: &str, x: &DataTable) -> Option<String> {
    let fq = formulate(text, x);
    let t = classify_fact_type(text);
    if task_types(&fq.tokens).len() > 1 {
        return None;
    }
    let mut f = DataFact::new(t);
    let mask = required_fields(t);
    let measures = measures_in(&fq, 0, fq.tokens.len());
    let agg = admissible_aggs(text)[0];
    if mask.measures > measures.len() {
        return None;
    }
    f.measure = measures.into_iter().take(mask.measures).map(|c| Measure::new(c, agg)).collect();
    if mask.breakdown != crate::fact::BreakdownRule::Forbidden {
        f.breakdown = breakdown_in(&fq, 0, fq.tokens.len(), t, None).map(|(_, c)| c);
    }
    Some(render(&f))
}

fn comparison(fq: &FormulatedQuestion, x: &DataTable) -> Option<(String, String)> {
    let c = fq.tokens.iter().position(|t| t.starts_with("compar"))?;
    let values: Vec<(&str, &str)> = fq
        .value_mentions()
        .filter(|(m, _, _)| m.start > c)
        .map(|(_, col, v)| (col, v))
        .collect();
    let mut t = {
        let mut scores = [0usize; 10];
        for h in keyword_hits(&fq.tokens) {
            if h.fact_type != FactType::Difference {
                scores[h.fact_type.index()] += 1;
            }
        }
        let text: Vec<&str> = fq.tokens.iter().map(String::as_str).filter(|w| !w.starts_with("compar")).collect();
        let t = classify_fact_type(&text.join(" "));
        if t == FactType::Difference { FactType::Value } else { t }
    };
    if let [(col_a, a), (col_b, b), ..] = values.as_slice() {
        if col_a == col_b {
            let mask = required_fields(t);
            let mut f = DataFact::new(t);
            if mask.measures > 0 {
                let m = default_measure(fq, &fq.text)?;
                f.measure = vec![m; 1];
                if mask.measures == 2 {
                    let second = measures_in(fq, 0, fq.tokens.len()).into_iter().nth(1)?;
                    f.measure.push(Measure::new(second, f.measure[0].agg));
                }
            }
            if mask.breakdown.required() || mask.breakdown == crate::fact::BreakdownRule::Optional {
                f.breakdown = breakdown_in(fq, 0, fq.tokens.len(), t, Some(col_a)).map(|(_, c)| c);
                if f.breakdown.is_none() && mask.breakdown.required() {
                    t = FactType::Value;
                    f = DataFact::new(t).with_measure(default_measure(fq, &fq.text)?);
                }
            }
            let q1 = render(&f.clone().with_subspace(Subspace::of(vec![Filter::equals(*col_a, *a)])));
            let q2 = render(&f.with_subspace(Subspace::of(vec![Filter::equals(*col_b, *b)])));
            return Some((q1, q2));
        }
    }
    let measures = measures_in(fq, c, fq.tokens.len());
    if let [a, b, ..] = measures.as_slice() {
        let agg = admissible_aggs(&fq.text)[0];
        let mask = required_fields(t);
        if mask.measures != 1 {
            t = FactType::Value;
        }
        let bd = if required_fields(t).breakdown.required() {
            breakdown_in(fq, 0, fq.tokens.len(), t, None).map(|(_, c)| c)
        } else {
            None
        };
        let make = |m: &str| {
            let mut f = DataFact::new(t).with_measure(Measure::new(m, agg));
            f.breakdown = bd.clone();
            render(&f)
        };
        let _ = x;
        return Some((make(a), make(b)));
    }
    None
}

/// Sub-question for one side of a conjunction, sharing the subject entity and measure.
fn clause_question(
    fq: &FormulatedQuestion,
    x: &DataTable,
    start: usize,
    end: usize,
    subject: Option<&(usize, String)>,
    shared_measure: Option<&Measure>,
) -> Option<String> {
    let adjs: Vec<_> = adjective_hits(fq).into_iter().filter(|a| a.start >= start && a.end <= end).collect();
    let subject_name = subject.map(|(_, s)| s.to_lowercase());
    if let Some(a) = adjs.first() {
        let who = subject_name.clone().unwrap_or_else(|| "category".into());
        let selling = fq.tokens[a.start..a.end].iter().any(|t| t.starts_with("sell"));
        let m = a.column.to_lowercase();
        return Some(if selling {
            format!("which {who} has the {} {m}?", if a.high { "highest" } else { "lowest" })
        } else {
            format!("which {who} has {m} {} than average?", if a.high { "higher" } else { "lower" })
        });
    }
    let side: Vec<String> = fq.tokens[start..end].to_vec();
    let hits = keyword_hits(&side);
    if hits.is_empty() {
        return None;
    }
    let side_text = side.join(" ");
    let t = classify_fact_type(&side_text);
    let side_measure = measures_in(fq, start, end).into_iter().next().map(|c| Measure::new(c, admissible_aggs(&fq.text)[0]));
    let measure = side_measure.clone().or_else(|| shared_measure.cloned());
    let in_side_subject = subject.is_some_and(|(s, _)| *s >= start && *s < end);
    if t == FactType::Trend {
        let m = crate::render::measure_phrase(&measure?);
        let direction = side.iter().find(|w| matches!(w.as_str(), "increasing" | "decreasing" | "growing" | "declining"));
        if let (Some(who), Some(dir), Some((_, sub))) = (&subject_name, direction, subject) {
            if column_kind(x, sub) == Some(ColumnType::Categorical) {
                let dir = if matches!(dir.as_str(), "decreasing" | "declining") { "a decreasing" } else { "an increasing" };
                return Some(if in_side_subject {
                    format!("which {who} has {dir} trend of {m}?")
                } else {
                    format!("what is the trend of {m} and which {who} has {dir} trend of {m}?")
                });
            }
        }
        let bd = breakdown_in(fq, start, end, t, None).map(|(_, c)| c.to_lowercase());
        return Some(match bd {
            Some(bd) => format!("what is the trend of {m} over {bd}?"),
            None => format!("what is the trend of {m}?"),
        });
    }
    let mask = required_fields(t);
    let mut f = DataFact::new(t);
    if mask.measures >= 1 {
        f.measure.push(measure?);
    }
    if mask.measures == 2 {
        let second = measures_in(fq, 0, fq.tokens.len()).into_iter().find(|c| c != &f.measure[0].column)?;
        f.measure.push(Measure::new(second, f.measure[0].agg));
    }
    if mask.breakdown != crate::fact::BreakdownRule::Forbidden {
        f.breakdown = breakdown_in(fq, start, end, t, None)
            .or_else(|| subject.filter(|(_, s)| column_kind(x, s).is_some_and(|k| mask.breakdown.admits(k))).cloned())
            .or_else(|| breakdown_in(fq, 0, fq.tokens.len(), t, None))
            .map(|(_, c)| c);
    }
    Some(render(&f))
}

fn conjunction(fq: &FormulatedQuestion, x: &DataTable, at: usize) -> Result<(String, String), DecomposeError> {
    let n = fq.tokens.len();
    let subject = entity(fq);
    let shared = default_measure(fq, &fq.text);
    let left = clause_question(fq, x, 0, at, subject.as_ref(), shared.as_ref())
        .unwrap_or_else(|| question_mark(fq.slice(0, at)));
    let right_tail = fq.slice(at + 1, n).to_string();
    let right = if crate::question::conjunctive_and(&formulate(&right_tail, x)).is_some() {
        question_mark(&right_tail)
    } else {
        clause_question(fq, x, at + 1, n, subject.as_ref(), shared.as_ref())
            .unwrap_or_else(|| question_mark(&right_tail))
    };
    if normalize_question(&left) == normalize_question(&right) {
        return Err(DecomposeError::Frame);
    }
    Ok((left, right))
}

/// Which slot a Type-II question leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingSlot {
    FactType,
    Measure,
    Breakdown,
    MeasureAndBreakdown,
}

pub fn missing_slot(fq: &FormulatedQuestion) -> MissingSlot {
    if keyword_hits(&fq.tokens).is_empty() {
        return MissingSlot::FactType;
    }
    let t = classify_fact_type(&fq.text);
    let no_measure = required_fields(t).measures > 0 && !has_measure(fq);
    let no_breakdown = !has_breakdown(fq, t);
    match (no_measure, no_breakdown) {
        (true, true) => MissingSlot::MeasureAndBreakdown,
        (true, false) => MissingSlot::Measure,
        (false, true) => MissingSlot::Breakdown,
        (false, false) => MissingSlot::FactType,
    }
}

/// Candidate fact types when the question names none.
pub const OPEN_TYPES: [FactType; 5] =
    [FactType::Extreme, FactType::Trend, FactType::Value, FactType::Difference, FactType::Distribution];

/// Breakdown columns worth proposing: no identifiers (more than 20 distinct values).
fn breakdown_columns(x: &DataTable, t: FactType) -> Vec<String> {
    let rule = required_fields(t).breakdown;
    x.columns()
        .iter()
        .filter(|c| rule.admits(c.kind()))
        .filter(|c| c.kind() == ColumnType::Temporal || c.cardinality() <= IDENTIFIER_CARDINALITY)
        .map(|c| c.name.clone())
        .collect()
}

/// A candidate simple question for a Type-II split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub question: String,
    pub score: f64,
}

/// Placeholders standing in for an omitted column slot when a fill is scored.
pub const MASKED_MEASURE: &str = "value";
pub const MASKED_BREAKDOWN: &str = "category";

/// Every candidate fill for the missing slot, scored against the question, best first.
///
/// A fill is scored with the columns the question omits replaced by placeholders, since the
/// question holds no evidence about them; equal scores keep schema order.
pub fn type2_candidates(
    fq: &FormulatedQuestion,
    x: &DataTable,
    provider: &dyn SimilarityProvider,
) -> Result<Vec<Candidate>, DecomposeError> {
    let questions = type2_fills(fq, x)?;
    let ranker = crate::search::Ranker::new(&fq.text, provider)?;
    let mut scored = Vec::with_capacity(questions.len());
    let mut seen = HashSet::new();
    for (q, masked, t) in questions {
        if seen.insert(normalize_question(&q)) {
            let score = ranker.score_text(&masked)?;
            scored.push((Candidate { question: q, score }, t));
        }
    }
    scored.sort_by(|a, b| b.0.score.total_cmp(&a.0.score));
    if missing_slot(fq) == MissingSlot::FactType {
        // No type keyword to score against: each type's best fill in open-type order, then
        // the runners-up.
        let mut seen_per_type: HashMap<FactType, usize> = HashMap::new();
        let mut keyed: Vec<(usize, usize, Candidate)> = scored
            .into_iter()
            .map(|(c, t)| {
                let t = t.expect("fact-type fills carry their type");
                let n = seen_per_type.entry(t).or_insert(0);
                *n += 1;
                let prior = OPEN_TYPES.iter().position(|o| *o == t).unwrap_or(OPEN_TYPES.len());
                (*n, prior, c)
            })
            .collect();
        keyed.sort_by_key(|(n, prior, _)| (*n, *prior));
        return Ok(keyed.into_iter().map(|(_, _, c)| c).collect());
    }
    Ok(scored.into_iter().map(|(c, _)| c).collect())
}

/// Candidate questions paired with the text they are scored by.
fn type2_fills(fq: &FormulatedQuestion, x: &DataTable) -> Result<Vec<(String, String, Option<FactType>)>, DecomposeError> {
    let n = fq.tokens.len();
    let agg = admissible_aggs(&fq.text)[0];
    let numeric: Vec<String> = x.columns_of(ColumnType::Numerical).map(|c| c.name.clone()).collect();
    let mut reasons = Vec::new();
    let mut out = Vec::new();
    match missing_slot(fq) {
        MissingSlot::FactType => {
            let measures = {
                let m = measures_in(fq, 0, n);
                if m.is_empty() { numeric.clone() } else { m }
            };
            if measures.is_empty() {
                reasons.push("no numerical column".to_string());
            }
            let mentioned_bd = breakdown_in(fq, 0, n, FactType::Distribution, None);
            for t in OPEN_TYPES {
                let rule = required_fields(t).breakdown;
                let bds: Vec<Option<String>> = match (&mentioned_bd, rule.required()) {
                    (Some((_, b)), true) => {
                        if column_kind(x, b).is_some_and(|k| rule.admits(k)) {
                            vec![Some(b.clone())]
                        } else {
                            continue;
                        }
                    }
                    (Some(_), false) => continue,
                    (None, true) => breakdown_columns(x, t).into_iter().map(Some).collect(),
                    (None, false) => vec![None],
                };
                for m in &measures {
                    for bd in &bds {
                        let mut f = DataFact::new(t).with_measure(Measure::new(m.clone(), agg));
                        f.breakdown = bd.clone();
                        let q = render(&f);
                        out.push((q.clone(), q, Some(t)));
                    }
                }
            }
        }
        MissingSlot::Measure | MissingSlot::MeasureAndBreakdown => {
            let t = classify_fact_type(&fq.text);
            if numeric.is_empty() {
                reasons.push("no numerical column".to_string());
            }
            let mentioned = breakdown_in(fq, 0, n, t, None);
            let masked_bd = if mentioned.is_none() { Some(MASKED_BREAKDOWN.to_string()) } else { None };
            let bds: Vec<(Option<String>, Option<String>)> = match &mentioned {
                Some((at, b)) => vec![(Some(b.clone()), breakdown_phrase(fq, *at))],
                None if required_fields(t).breakdown.required() => {
                    breakdown_columns(x, t).into_iter().map(|b| (Some(b), None)).collect()
                }
                None => vec![(None, None)],
            };
            if bds.is_empty() {
                reasons.push(no_breakdown_reason(t));
            }
            for m in &numeric {
                for (bd, phrase) in &bds {
                    if required_fields(t).measures == 2 {
                        continue;
                    }
                    let mut f = DataFact::new(t).with_measure(Measure::new(m.clone(), agg));
                    f.breakdown = bd.clone();
                    let mut g = DataFact::new(t).with_measure(Measure::new(MASKED_MEASURE, agg));
                    g.breakdown = if bd.is_some() { masked_bd.clone().or_else(|| bd.clone()) } else { None };
                    let (q, masked) = (render(&f), render(&g));
                    out.push(match bd {
                        Some(b) => (
                            with_phrase(q, b, phrase.as_deref()),
                            g.breakdown.as_deref().map_or(masked.clone(), |gb| with_phrase(masked.clone(), gb, phrase.as_deref())),
                            None,
                        ),
                        None => (q, masked, None),
                    });
                }
            }
        }
        MissingSlot::Breakdown => {
            let t = classify_fact_type(&fq.text);
            let cols = breakdown_columns(x, t);
            if cols.is_empty() {
                reasons.push(no_breakdown_reason(t));
            }
            let base = fq.text.trim().trim_end_matches(['?', '.', '!']).trim().to_string();
            for b in cols {
                out.push((
                    format!("{base} over different {}?", b.to_lowercase()),
                    format!("{base} over different {MASKED_BREAKDOWN}?"),
                    None,
                ));
            }
        }
    }
    if !reasons.is_empty() || out.is_empty() {
        if reasons.is_empty() {
            reasons.push("no candidate sub-questions".into());
        }
        return Err(DecomposeError::Unsatisfiable(reasons));
    }
    out.truncate(CANDIDATE_CAP);
    Ok(out)
}

fn no_breakdown_reason(t: FactType) -> String {
    match required_fields(t).breakdown {
        crate::fact::BreakdownRule::Only(ColumnType::Temporal) => "no temporal column".into(),
        crate::fact::BreakdownRule::Only(ColumnType::Categorical) => "no categorical column".into(),
        _ => "no temporal or categorical column".into(),
    }
}

/// Splits a Type-II question into its two best-ranked candidate fills.
///
/// A question with neither a task nor a breakdown ("How is the sales?") instead gets a fixed
/// overview: the best category, then the trend over time joined with the overall value, which
/// splits again one level down.
pub fn decompose_type2(
    fq: &FormulatedQuestion,
    x: &DataTable,
    provider: &dyn SimilarityProvider,
) -> Result<(String, String), DecomposeError> {
    if missing_slot(fq) == MissingSlot::FactType && breakdown_in(fq, 0, fq.tokens.len(), FactType::Distribution, None).is_none() {
        if let Some(pair) = overview(fq, x)? {
            return Ok(pair);
        }
    }
    let cands = type2_candidates(fq, x, provider)?;
    let first = cands[0].question.clone();
    let second = cands.get(1).map_or_else(|| first.clone(), |c| c.question.clone());
    Ok((first, second))
}

fn overview(fq: &FormulatedQuestion, x: &DataTable) -> Result<Option<(String, String)>, DecomposeError> {
    let Some(m) = default_measure(fq, &fq.text) else {
        return Err(DecomposeError::Unsatisfiable(vec!["no numerical column".into()]));
    };
    if x.columns_of(ColumnType::Categorical).next().is_none() {
        return Ok(None);
    }
    let Some(t) = x.columns_of(ColumnType::Temporal).next() else {
        return Ok(None);
    };
    let best = render(&DataFact::new(FactType::Extreme).with_measure(m.clone()));
    let trend = render(&DataFact::new(FactType::Trend).with_measure(m.clone()).with_breakdown(t.name.clone()));
    let total = render(&DataFact::new(FactType::Value).with_measure(m));
    Ok(Some((best, format!("{} and {}", trend.trim_end_matches('?'), total))))
}

/// Normalized unordered pair, for comparing decompositions up to template phrasing.
pub fn normalized_pair(a: &str, b: &str) -> (String, String) {
    let (a, b) = (normalize_question(a), normalize_question(b));
    if a <= b { (a, b) } else { (b, a) }
}

/// Columns a mention-annotated question refers to, used by callers that report reasons.
pub fn mentioned_targets(fq: &FormulatedQuestion) -> Vec<&MentionTarget> {
    fq.mentions.iter().map(|m| &m.target).collect()
}
