//! The ask pipeline: decompose, search each leaf, evaluate, chart and lay out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{build_chart, layout, ChartSpec, Dashboard};
use crate::decompose::{resolve, DecomposeError, Decomposer, DecompositionTree, ResolveOptions, RuleDecomposer, IDENTIFIER_CARDINALITY};
use crate::fact::{evaluate_fact, required_fields, BreakdownRule, DataFact, FactType, Measure, Agg};
use crate::question::{classify_fact_type, RuleClassifier};
use crate::render::fact_to_question;
use crate::search::{answer, search, ScoredFact, SearchConfig, SearchError};
use crate::similarity::{ReferenceProvider, SimilarityProvider};
use crate::table::{ColumnType, DataTable};

pub const CHARTS_PER_SECTION: usize = 3;
pub const MAX_SUGGESTIONS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub search: SearchConfig,
    pub max_depth: usize,
    pub charts_per_section: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            search: SearchConfig::default(),
            max_depth: crate::decompose::DEFAULT_MAX_DEPTH,
            charts_per_section: CHARTS_PER_SECTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unanswered {
    pub question: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub schema_version: String,
    pub tree: DecompositionTree,
    pub dashboard: Dashboard,
    /// Leaves that produced no chart.
    pub unanswered: Vec<Unanswered>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AskError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error("unanswerable: {}", .0.iter().map(|u| u.reason.as_str()).collect::<Vec<_>>().join("; "))]
    Unanswerable(Vec<Unanswered>),
}

impl AskError {
    pub fn reasons(&self) -> Vec<String> {
        match self {
            AskError::EmptyQuestion => vec![self.to_string()],
            AskError::Decompose(DecomposeError::Unsatisfiable(r)) => r.clone(),
            AskError::Decompose(e) => vec![e.to_string()],
            AskError::Unanswerable(u) => u.iter().map(|u| u.reason.clone()).collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuggestError {
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
}

/// Every template question the table supports: one per fact type, measure and admissible
/// breakdown, in partial form. This is the reference provider's IDF corpus.
pub fn template_corpus(x: &DataTable) -> Vec<String> {
    let mut out = Vec::new();
    for t in FactType::ALL {
        for f in template_facts(x, t, None) {
            if let Ok(q) = fact_to_question(&f, true) {
                out.push(q);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn breakdown_options(x: &DataTable, t: FactType) -> Vec<Option<String>> {
    let rule = required_fields(t).breakdown;
    let mut v: Vec<Option<String>> = Vec::new();
    if !rule.required() {
        v.push(None);
    }
    if rule != BreakdownRule::Forbidden {
        v.extend(
            x.columns()
                .iter()
                .filter(|c| rule.admits(c.kind()))
                .filter(|c| c.kind() != ColumnType::Categorical || c.cardinality() <= IDENTIFIER_CARDINALITY)
                .map(|c| Some(c.name.clone())),
        );
    }
    v
}

/// Template facts of type `t`, optionally restricted to those that use `column`.
fn template_facts(x: &DataTable, t: FactType, column: Option<&str>) -> Vec<DataFact> {
    let numeric: Vec<String> = x.columns_of(ColumnType::Numerical).map(|c| c.name.clone()).collect();
    let measure_sets: Vec<Vec<String>> = match required_fields(t).measures {
        0 => vec![vec![]],
        1 => numeric.iter().map(|m| vec![m.clone()]).collect(),
        _ => {
            let mut v = Vec::new();
            for i in 0..numeric.len() {
                for j in i + 1..numeric.len() {
                    v.push(vec![numeric[i].clone(), numeric[j].clone()]);
                }
            }
            v
        }
    };
    let mut out = Vec::new();
    for ms in &measure_sets {
        for bd in breakdown_options(x, t) {
            let uses = |c: &str| ms.iter().any(|m| m == c) || bd.as_deref() == Some(c);
            if column.is_some_and(|c| !uses(c)) {
                continue;
            }
            let mut f = DataFact::new(t);
            f.measure = ms.iter().map(|m| Measure::new(m.clone(), Agg::Sum)).collect();
            f.breakdown = bd;
            out.push(f);
        }
    }
    out
}

/// Question suggestions for a table, optionally about one column: one per fact type in turn,
/// at most twelve, in a fixed order.
pub fn suggestions(x: &DataTable, column: Option<&str>) -> Result<Vec<String>, SuggestError> {
    let column = match column {
        Some(c) => Some(x.column(c).ok_or_else(|| SuggestError::UnknownColumn(c.to_string()))?.name.as_str()),
        None => None,
    };
    let per_type: Vec<Vec<String>> = FactType::ALL
        .iter()
        .map(|&t| {
            template_facts(x, t, column)
                .iter()
                .filter_map(|f| fact_to_question(f, true).ok())
                .collect()
        })
        .collect();
    let mut out: Vec<String> = Vec::new();
    let longest = per_type.iter().map(Vec::len).max().unwrap_or(0);
    'fill: for i in 0..longest {
        for qs in &per_type {
            if let Some(q) = qs.get(i) {
                if out.len() >= MAX_SUGGESTIONS {
                    break 'fill;
                }
                if !out.contains(q) {
                    out.push(q.clone());
                }
            }
        }
    }
    Ok(out)
}

/// A loaded table with its similarity provider and decomposition backend.
pub struct Engine {
    table: DataTable,
    provider: Box<dyn SimilarityProvider>,
    backend: Box<dyn Decomposer>,
    pub config: EngineConfig,
}

impl Engine {
    /// Rule backend and a reference provider fitted on the table's template questions.
    pub fn new(table: DataTable) -> Engine {
        let provider = ReferenceProvider::fit(&template_corpus(&table));
        Engine { table, provider: Box::new(provider), backend: Box::new(RuleDecomposer), config: EngineConfig::default() }
    }

    pub fn with_provider(mut self, p: Box<dyn SimilarityProvider>) -> Engine {
        self.provider = p;
        self
    }

    pub fn with_backend(mut self, b: Box<dyn Decomposer>) -> Engine {
        self.backend = b;
        self
    }

    pub fn with_config(mut self, c: EngineConfig) -> Engine {
        self.config = c;
        self
    }

    pub fn table(&self) -> &DataTable {
        &self.table
    }

    pub fn provider(&self) -> &dyn SimilarityProvider {
        self.provider.as_ref()
    }

    pub fn backend(&self) -> &dyn Decomposer {
        self.backend.as_ref()
    }

    pub fn decompose(&self, q: &str) -> Result<DecompositionTree, DecomposeError> {
        self.decompose_using(q, &self.config, self.backend.as_ref())
    }

    /// Decomposes with a per-call config and backend.
    pub fn decompose_using(&self, q: &str, config: &EngineConfig, backend: &dyn Decomposer) -> Result<DecompositionTree, DecomposeError> {
        let opts = ResolveOptions { max_depth: config.max_depth, classifier: &RuleClassifier };
        resolve(q, &self.table, backend, self.provider.as_ref(), opts)
    }

    /// Top facts for a simple question.
    pub fn facts(&self, q: &str) -> Result<Vec<ScoredFact>, SearchError> {
        answer(q, &self.table, &self.config.search, self.provider.as_ref())
    }

    pub fn suggestions(&self, column: Option<&str>) -> Result<Vec<String>, SuggestError> {
        suggestions(&self.table, column)
    }

    fn leaf_charts(&self, q: &str, forced: bool, config: &EngineConfig) -> Result<Vec<ChartSpec>, String> {
        let found = if forced {
            search(q, classify_fact_type(q), &self.table, &config.search, self.provider.as_ref())
        } else {
            answer(q, &self.table, &config.search, self.provider.as_ref())
        };
        let found = found.map_err(|e| e.to_string())?;
        let charts: Vec<ChartSpec> = found
            .iter()
            .take(config.charts_per_section)
            .filter_map(|s| {
                let r = evaluate_fact(&s.fact, &self.table).ok()?;
                build_chart(&r, s.score).ok()
            })
            .collect();
        if charts.is_empty() {
            return Err("no chartable fact".into());
        }
        Ok(charts)
    }

    /// Answers a question with one dashboard section per decomposed sub-question.
    pub fn ask(&self, q: &str) -> Result<AskResponse, AskError> {
        self.ask_using(q, &self.config, self.backend.as_ref())
    }

    /// [`ask`](Self::ask) with a per-call config and backend.
    pub fn ask_using(&self, q: &str, config: &EngineConfig, backend: &dyn Decomposer) -> Result<AskResponse, AskError> {
        let q = q.trim();
        if q.is_empty() {
            return Err(AskError::EmptyQuestion);
        }
        let tree = self.decompose_using(q, config, backend)?;
        self.answer_tree(q, tree, config)
    }

    /// Charts every leaf of an already decomposed question.
    pub fn answer_tree(&self, q: &str, tree: DecompositionTree, config: &EngineConfig) -> Result<AskResponse, AskError> {
        let mut sections = Vec::new();
        let mut unanswered = Vec::new();
        for leaf in tree.leaves() {
            match self.leaf_charts(&leaf.question, leaf.forced, config) {
                Ok(charts) => sections.push((leaf.question.clone(), charts)),
                Err(reason) => unanswered.push(Unanswered { question: leaf.question.clone(), reason }),
            }
        }
        if sections.is_empty() {
            return Err(AskError::Unanswerable(unanswered));
        }
        Ok(AskResponse {
            schema_version: crate::SCHEMA_VERSION.to_string(),
            dashboard: layout(q, sections),
            tree,
            unanswered,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn overview_question_has_three_sections() {
        let r = Engine::new(fixtures::cars()).ask("How is the sales?").unwrap();
        let types: Vec<FactType> = r.dashboard.sections.iter().map(|s| s.charts[0].chart.fact_type).collect();
        assert_eq!(types.len(), 3);
        for t in [FactType::Extreme, FactType::Trend, FactType::Value] {
            assert!(types.contains(&t), "{types:?}");
        }
    }

    #[test]
    fn trend_without_time_is_unanswerable() {
        let x = crate::table::load_table(b"team,city\na,x\nb,y\n", &Default::default()).unwrap();
        let err = Engine::new(x).ask("What is the trend?").unwrap_err();
        assert!(err.reasons().iter().any(|r| r.contains("no temporal column")), "{err:?}");
    }

    #[test]
    fn suggestions_cover_types() {
        let x = fixtures::cars();
        let all = suggestions(&x, None).unwrap();
        assert!(all.len() <= 12);
        let types: std::collections::HashSet<FactType> = all.iter().map(|q| classify_fact_type(q)).collect();
        assert!(types.len() >= 4);
        let sales = suggestions(&x, Some("sales")).unwrap();
        assert!(sales.iter().any(|q| q.contains("trend") && q.contains("sales")));
        assert!(sales.iter().any(|q| q.contains("highest") && q.contains("sales")));
        assert_eq!(suggestions(&x, Some("nope")), Err(SuggestError::UnknownColumn("nope".into())));
    }
}
