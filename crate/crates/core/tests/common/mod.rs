//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::cmp::Ordering;

use tabqa_core::fact::evaluate_fact;
use tabqa_core::question::classify_fact_type;
use tabqa_core::search::{admissible_aggs, expand, ranking_text, searches, PartialFact, FIELD_ORDER};
use tabqa_core::{DataFact, DataTable, FactType, ScoredFact, SearchConfig, SimilarityProvider};

/// Textbook full-matrix edit distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// Every node of the unpruned search tree for `t`: (complete facts, total node count).
pub fn enumerate(q: &str, t: FactType, x: &DataTable, cfg: &SearchConfig) -> (Vec<DataFact>, usize) {
    let aggs = admissible_aggs(q);
    let mut level = vec![PartialFact::root(t)];
    let mut nodes = 1;
    for field in FIELD_ORDER {
        if !searches(t, field) {
            continue;
        }
        level = level.iter().flat_map(|n| expand(n, field, x, &aggs, cfg)).collect();
        nodes += level.len();
    }
    (level.into_iter().map(|n| n.fact).collect(), nodes)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exhaustive ranking: every valid complete fact, scored with dense encodings.
pub fn exhaustive(q: &str, t: FactType, x: &DataTable, cfg: &SearchConfig, p: &dyn SimilarityProvider) -> (Vec<ScoredFact>, usize) {
    let (facts, nodes) = enumerate(q, t, x, cfg);
    let qv = p.encode(q).unwrap();
    let mut out: Vec<ScoredFact> = facts
        .into_iter()
        .filter(|f| evaluate_fact(f, x).is_ok())
        .map(|f| {
            let score = dot(&qv, &p.encode(&ranking_text(&f, true, x)).unwrap());
            ScoredFact { fact: f, score, complete: true }
        })
        .collect();
    out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.fact.canonical().cmp(&b.fact.canonical())));
    (out, nodes)
}

/// A question for fact type `t` over `x`: the first template question of that type, or the
/// type name with the first column.
pub fn question_for(t: FactType, x: &DataTable) -> String {
    tabqa_core::pipeline::template_corpus(x)
        .into_iter()
        .find(|q| classify_fact_type(q) == t)
        .unwrap_or_else(|| format!("{} of {}", t.as_str(), x.columns()[0].name))
}

/// Compares two fact lists as sets with scores within `tol`.
pub fn same_facts(a: &[ScoredFact], b: &[ScoredFact], tol: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} facts vs {}", a.len(), b.len()));
    }
    let key = |s: &ScoredFact| s.fact.canonical();
    let mut a: Vec<&ScoredFact> = a.iter().collect();
    let mut b: Vec<&ScoredFact> = b.iter().collect();
    a.sort_by_key(|s| key(s));
    b.sort_by_key(|s| key(s));
    for (x, y) in a.iter().zip(&b) {
        if key(x) != key(y) {
            return Err(format!("fact {} vs {}", key(x), key(y)));
        }
        if (x.score - y.score).abs() > tol {
            return Err(format!("score of {}: {} vs {}", key(x), x.score, y.score));
        }
    }
    Ok(())
}

/// Mirror of the golden decomposition file.
#[derive(Debug, serde::Deserialize)]
pub struct Golden {
    pub table: String,
    pub question: String,
    pub expected: [String; 2],
}

pub const GOLDEN_DECOMPOSITIONS: &str = include_str!("../golden/decompositions.json");

/// A chart for every valid complete fact of every type over `x`, default candidate spaces.
pub fn all_charts(x: &DataTable) -> Vec<tabqa_core::ChartSpec> {
    let cfg = SearchConfig::default();
    let mut out = Vec::new();
    for t in FactType::ALL {
        let (facts, _) = enumerate(t.as_str(), t, x, &cfg);
        for f in facts {
            if let Ok(r) = evaluate_fact(&f, x) {
                if let Ok(c) = tabqa_core::chart::build_chart(&r, 1.0) {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// `n` seeded simple questions over the corpus tables: a uniformly drawn fact type, table and
/// complete fact, rendered by its template and passed through the synonym perturbation.
pub fn sample_simple_questions(n: usize, seed: u64) -> Vec<(String, FactType)> {
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;

    let cfg = SearchConfig::default();
    let tables = tabqa_core::fixtures::corpus_tables();
    let pools: Vec<(FactType, Vec<DataFact>)> = FactType::ALL
        .iter()
        .map(|&t| {
            let facts = tables
                .iter()
                .flat_map(|x| enumerate(t.as_str(), t, x, &cfg).0.into_iter().filter(|f| evaluate_fact(f, x).is_ok()))
                .collect();
            (t, facts)
        })
        .filter(|(_, f): &(FactType, Vec<DataFact>)| !f.is_empty())
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (t, facts) = pools.choose(&mut rng).unwrap();
            let f = facts.choose(&mut rng).unwrap();
            let q = tabqa_core::render::fact_to_question(f, false).unwrap();
            (tabqa_core::corpus::perturb(&q, &mut rng), *t)
        })
        .collect()
}

/// Every valid complete fact over the corpus tables.
pub fn complete_facts() -> Vec<DataFact> {
    let cfg = SearchConfig::default();
    let mut out = Vec::new();
    for x in tabqa_core::fixtures::corpus_tables() {
        for t in FactType::ALL {
            out.extend(enumerate(t.as_str(), t, &x, &cfg).0.into_iter().filter(|f| evaluate_fact(f, &x).is_ok()));
        }
    }
    out
}
