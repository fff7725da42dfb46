//! Beam search over data facts, filling measure, breakdown, subspace and focus in turn.
//!
//! Every node of the search tree is a fact with some fields still open. Each round keeps the
//! `k` best nodes, expands them on the next field and ranks the children by how close their
//! templated question is to the user's question.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact::{
    evaluate_fact, focus_candidates, required_fields, Agg, BreakdownRule, DataFact, Derived,
    FactType, Measure,
};
use crate::question::{classify_complexity, classify_fact_type, formulate, QuestionClass};
use crate::render::{fact_to_question, render_question};
use crate::similarity::{dot_sparse, ProviderError, SimilarityProvider};
use crate::table::{ColumnType, DataTable, Filter, Subspace};
use crate::text::words;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub max_subspace_filters: usize,
    pub max_categorical_cardinality: usize,
    /// Cap on measure candidates per node.
    pub max_measures: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { beam_width: 5, max_subspace_filters: 1, max_categorical_cardinality: 20, max_measures: 24 }
    }
}

impl SearchConfig {
    pub fn with_beam(beam_width: usize) -> SearchConfig {
        SearchConfig { beam_width, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    #[serde(flatten)]
    pub fact: DataFact,
    pub score: f64,
    pub complete: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),
    #[error("expected a simple question, got {}", .0.as_str())]
    NotSimple(QuestionClass),
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Measure,
    Breakdown,
    Subspace,
    Focus,
}

pub const FIELD_ORDER: [Field; 4] = [Field::Measure, Field::Breakdown, Field::Subspace, Field::Focus];

/// Whether the search visits `field` for facts of type `t`.
pub fn searches(t: FactType, field: Field) -> bool {
    let mask = required_fields(t);
    match field {
        Field::Measure => mask.measures > 0,
        Field::Breakdown => mask.breakdown != BreakdownRule::Forbidden,
        Field::Subspace => true,
        Field::Focus => mask.focus.required(),
    }
}

/// A fact with a record of which fields have been decided.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFact {
    pub fact: DataFact,
    pub filled: Vec<Field>,
}

impl PartialFact {
    pub fn root(t: FactType) -> PartialFact {
        PartialFact { fact: DataFact::new(t), filled: Vec::new() }
    }

    pub fn is_complete(&self) -> bool {
        FIELD_ORDER
            .iter()
            .all(|f| !searches(self.fact.fact_type, *f) || self.filled.contains(f))
    }

    fn with(&self, field: Field, fact: DataFact) -> PartialFact {
        let mut filled = self.filled.clone();
        filled.push(field);
        PartialFact { fact, filled }
    }
}

/// Aggregations a question admits: `average`/`mean` select mean, `count`/`number of` count,
/// otherwise sum and mean.
pub fn admissible_aggs(q: &str) -> Vec<Agg> {
    let w = words(q);
    let has = |s: &str| w.iter().any(|t| t == s);
    let pair = |a: &str, b: &str| w.windows(2).any(|p| p[0] == a && p[1] == b);
    if has("average") || has("mean") || has("avg") {
        vec![Agg::Mean]
    } else if has("count") || pair("number", "of") {
        vec![Agg::Count]
    } else {
        vec![Agg::Sum, Agg::Mean]
    }
}

/// Single-filter subspaces (plus the empty one) over low-cardinality categorical columns.
pub fn subspace_candidates(x: &DataTable, exclude: Option<&str>, cfg: &SearchConfig) -> Vec<Subspace> {
    let mut singles: Vec<Filter> = Vec::new();
    let mut out = vec![Subspace::all()];
    if cfg.max_subspace_filters == 0 {
        return out;
    }
    for col in x.columns_of(ColumnType::Categorical) {
        if exclude.is_some_and(|e| e.eq_ignore_ascii_case(&col.name)) {
            continue;
        }
        let keys = col.distinct_keys();
        if keys.len() > cfg.max_categorical_cardinality {
            continue;
        }
        singles.extend(keys.into_iter().map(|k| Filter::equals(col.name.clone(), k.to_string())));
    }
    let mut layer: Vec<Vec<Filter>> = vec![Vec::new()];
    for _ in 0..cfg.max_subspace_filters {
        let mut next = Vec::new();
        for base in &layer {
            let start = base
                .last()
                .and_then(|l| singles.iter().position(|s| s == l))
                .map_or(0, |p| p + 1);
            for f in &singles[start..] {
                if base.iter().any(|b| b.column == f.column) {
                    continue;
                }
                let mut combo = base.clone();
                combo.push(f.clone());
                next.push(combo);
            }
        }
        out.extend(next.iter().cloned().map(Subspace::of));
        layer = next;
    }
    out
}

/// Children of `node` on `field`; focus children are derived from the data.
pub fn expand(node: &PartialFact, field: Field, x: &DataTable, aggs: &[Agg], cfg: &SearchConfig) -> Vec<PartialFact> {
    let f = &node.fact;
    let mask = required_fields(f.fact_type);
    match field {
        Field::Measure => {
            let numeric: Vec<&str> = x.columns_of(ColumnType::Numerical).map(|c| c.name.as_str()).collect();
            let mut out = Vec::new();
            if mask.measures == 2 {
                for (i, a) in numeric.iter().enumerate() {
                    for b in &numeric[i + 1..] {
                        for &agg in aggs {
                            let mut fact = f.clone();
                            fact.measure = vec![Measure::new(*a, agg), Measure::new(*b, agg)];
                            out.push(node.with(field, fact));
                        }
                    }
                }
            } else {
                for c in &numeric {
                    for &agg in aggs {
                        let mut fact = f.clone();
                        fact.measure = vec![Measure::new(*c, agg)];
                        out.push(node.with(field, fact));
                    }
                }
            }
            out.truncate(cfg.max_measures);
            out
        }
        Field::Breakdown => {
            let mut out = Vec::new();
            if mask.breakdown == BreakdownRule::Optional {
                out.push(node.with(field, f.clone()));
            }
            for c in x.columns() {
                if mask.breakdown.admits(c.kind()) {
                    let mut fact = f.clone();
                    fact.breakdown = Some(c.name.clone());
                    out.push(node.with(field, fact));
                }
            }
            out
        }
        Field::Subspace => subspace_candidates(x, f.breakdown.as_deref(), cfg)
            .into_iter()
            .map(|s| {
                let mut fact = f.clone();
                fact.subspace = s;
                node.with(field, fact)
            })
            .collect(),
        Field::Focus => match focus_candidates(f, x) {
            Ok(cands) => cands
                .into_iter()
                .map(|focus| {
                    let mut fact = f.clone();
                    fact.focus = focus;
                    node.with(field, fact)
                })
                .collect(),
            Err(_) => Vec::new(),
        },
    }
}

/// The text a fact is ranked by: its partial template, or for a complete extreme fact the
/// template worded as highest or lowest according to the data.
pub fn ranking_text(fact: &DataFact, complete: bool, x: &DataTable) -> String {
    if complete && fact.fact_type == FactType::Extreme {
        if let Ok(r) = evaluate_fact(fact, x) {
            let lowest = matches!(r.derived, Derived::Extreme { highest: false, .. });
            return render_question(fact, true, lowest).unwrap_or_default();
        }
    }
    fact_to_question(fact, true).unwrap_or_default()
}

/// Scores texts against one fixed question.
pub struct Ranker<'a> {
    query: Vec<f64>,
    provider: &'a dyn SimilarityProvider,
}

impl<'a> Ranker<'a> {
    pub fn new(q: &str, provider: &'a dyn SimilarityProvider) -> Result<Ranker<'a>, ProviderError> {
        Ok(Ranker { query: provider.encode(q)?, provider })
    }

    pub fn score_text(&self, text: &str) -> Result<f64, ProviderError> {
        Ok(dot_sparse(&self.query, &self.provider.encode_sparse(text)?))
    }

    pub fn score(&self, fact: &DataFact, complete: bool, x: &DataTable) -> Result<f64, ProviderError> {
        self.score_text(&ranking_text(fact, complete, x))
    }
}

/// Descending score, ties broken by canonical fact serialization.
pub fn compare_scored(a: &ScoredFact, b: &ScoredFact) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.fact.canonical().cmp(&b.fact.canonical()))
}

fn rank(nodes: Vec<PartialFact>, ranker: &Ranker, x: &DataTable) -> Result<Vec<(PartialFact, ScoredFact)>, SearchError> {
    let mut scored = Vec::with_capacity(nodes.len());
    for n in nodes {
        let complete = n.is_complete();
        let score = ranker.score(&n.fact, complete, x)?;
        let s = ScoredFact { fact: n.fact.clone(), score, complete };
        scored.push((n, s));
    }
    scored.sort_by(|a, b| compare_scored(&a.1, &b.1));
    Ok(scored)
}

fn unsatisfiable_reason(t: FactType, field: Field, x: &DataTable) -> String {
    let mask = required_fields(t);
    match field {
        Field::Measure if mask.measures == 2 => "fewer than two numerical columns".into(),
        Field::Measure => "no numerical column".into(),
        Field::Breakdown => match mask.breakdown {
            BreakdownRule::Only(ColumnType::Temporal) => "no temporal column".into(),
            BreakdownRule::Only(ColumnType::Categorical) => "no categorical column".into(),
            _ => "no temporal or categorical column".into(),
        },
        Field::Subspace => format!("no admissible subspace in table '{}'", x.name()),
        Field::Focus => format!("no {t} found in the data"),
    }
}

/// Beam search for facts of type `t` answering `q`.
pub fn search(
    q: &str,
    t: FactType,
    x: &DataTable,
    cfg: &SearchConfig,
    provider: &dyn SimilarityProvider,
) -> Result<Vec<ScoredFact>, SearchError> {
    if cfg.beam_width == 0 {
        return Err(SearchError::ZeroBeam);
    }
    let ranker = Ranker::new(q, provider)?;
    let aggs = admissible_aggs(q);
    let mut frontier = rank(vec![PartialFact::root(t)], &ranker, x)?;
    for field in FIELD_ORDER {
        if !searches(t, field) {
            continue;
        }
        frontier.truncate(cfg.beam_width);
        let children: Vec<PartialFact> = frontier
            .iter()
            .flat_map(|(node, _)| expand(node, field, x, &aggs, cfg))
            .collect();
        if children.is_empty() {
            return Err(SearchError::Unsatisfiable(unsatisfiable_reason(t, field, x)));
        }
        frontier = rank(children, &ranker, x)?;
    }
    let valid: Vec<ScoredFact> = frontier
        .into_iter()
        .map(|(_, s)| s)
        .filter(|s| evaluate_fact(&s.fact, x).is_ok())
        .take(cfg.beam_width)
        .collect();
    if valid.is_empty() {
        return Err(SearchError::Unsatisfiable(format!("no valid {t} fact in the data")));
    }
    Ok(valid)
}

/// Classifies a simple question's fact type and searches for its answers.
pub fn answer(
    q: &str,
    x: &DataTable,
    cfg: &SearchConfig,
    provider: &dyn SimilarityProvider,
) -> Result<Vec<ScoredFact>, SearchError> {
    let class = classify_complexity(&formulate(q, x));
    if class != QuestionClass::Simple {
        return Err(SearchError::NotSimple(class));
    }
    search(q, classify_fact_type(q), x, cfg, provider)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::similarity::ReferenceProvider;

    #[test]
    fn toy_extreme_answer() {
        let toy = fixtures::toy_brands();
        let p = ReferenceProvider::new();
        let top = answer("which brand has the highest sales?", &toy, &SearchConfig::with_beam(1), &p).unwrap();
        assert_eq!(top.len(), 1);
        let f = &top[0].fact;
        assert_eq!(f.fact_type, FactType::Extreme);
        assert_eq!(f.breakdown.as_deref(), Some("brand"));
        assert_eq!(f.measure, vec![Measure::new("sales", Agg::Sum)]);
        assert_eq!(f.focus, vec!["B".to_string()]);
        assert!((top[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn complex_question_is_rejected() {
        let p = ReferenceProvider::new();
        let err = answer("How is the sales?", &fixtures::cars(), &SearchConfig::default(), &p).unwrap_err();
        assert!(matches!(err, SearchError::NotSimple(_)));
    }

    #[test]
    fn trend_without_temporal_column() {
        let t = crate::table::load_table(b"g,v\na,1\nb,2\n", &Default::default()).unwrap();
        let err = search("trend", FactType::Trend, &t, &SearchConfig::default(), &ReferenceProvider::new()).unwrap_err();
        assert_eq!(err, SearchError::Unsatisfiable("no temporal column".into()));
    }

    #[test]
    fn expansion_counts() {
        let t = crate::table::load_table(b"g,v,w\na,1,2\nb,2,3\nc,4,1\n", &Default::default()).unwrap();
        let cfg = SearchConfig::default();
        let root = PartialFact::root(FactType::Rank);
        assert_eq!(expand(&root, Field::Measure, &t, &[Agg::Sum, Agg::Mean], &cfg).len(), 4);
        assert_eq!(expand(&root, Field::Subspace, &t, &[Agg::Sum], &cfg).len(), 4);
        let ext = PartialFact::root(FactType::Extreme);
        let m = expand(&ext, Field::Measure, &t, &[Agg::Sum], &cfg).remove(0);
        let b = expand(&m, Field::Breakdown, &t, &[Agg::Sum], &cfg).remove(0);
        let s = expand(&b, Field::Subspace, &t, &[Agg::Sum], &cfg).remove(0);
        let focus: Vec<Vec<String>> = expand(&s, Field::Focus, &t, &[Agg::Sum], &cfg)
            .into_iter()
            .map(|n| n.fact.focus)
            .collect();
        assert_eq!(focus, vec![vec!["c".to_string()], vec!["a".to_string()]]);
    }

    #[test]
    fn categorization_skips_measures() {
        assert!(!searches(FactType::Categorization, Field::Measure));
        let r = search("what are the categories of brand?", FactType::Categorization, &fixtures::toy_brands(),
            &SearchConfig::default(), &ReferenceProvider::new()).unwrap();
        assert!(r[0].fact.measure.is_empty());
    }

    #[test]
    fn aggregation_keywords() {
        assert_eq!(admissible_aggs("what is the average price?"), vec![Agg::Mean]);
        assert_eq!(admissible_aggs("number of books per genre"), vec![Agg::Count]);
        assert_eq!(admissible_aggs("which brand sells most"), vec![Agg::Sum, Agg::Mean]);
    }

    #[test]
    fn results_are_sorted_and_bounded() {
        let p = ReferenceProvider::new();
        let r = answer("which year has the highest reviews?", &fixtures::books(), &SearchConfig::with_beam(3), &p).unwrap();
        assert!(r.len() <= 3);
        assert!(r.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(r.iter().all(|s| s.complete));
    }
}
