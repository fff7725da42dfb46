mod common;

use proptest::prelude::*;
use tabqa_core::decompose::normalized_pair;
use tabqa_core::question::classify_fact_type;
use tabqa_core::{fixtures, DataTable, Engine, FactType};

fn table(name: &str) -> DataTable {
    match name {
        "books" => fixtures::books(),
        "cars" => fixtures::cars(),
        other => panic!("no fixture {other}"),
    }
}

#[test]
fn golden_decompositions() {
    let golden: Vec<common::Golden> = serde_json::from_str(common::GOLDEN_DECOMPOSITIONS).unwrap();
    assert_eq!(golden.len(), 6);
    for g in golden {
        let engine = Engine::new(table(&g.table));
        let tree = engine.decompose(&g.question).unwrap();
        assert_eq!(tree.children.len(), 2, "{}", g.question);
        let got = normalized_pair(&tree.children[0].question, &tree.children[1].question);
        assert_eq!(got, normalized_pair(&g.expected[0], &g.expected[1]), "{}", g.question);
    }
}

#[test]
fn overview_covers_extreme_trend_and_value() {
    let engine = Engine::new(fixtures::cars());
    let tree = engine.decompose("How is the sales?").unwrap();
    let mut types: Vec<FactType> = tree.leaves().iter().map(|l| classify_fact_type(&l.question)).collect();
    types.sort();
    types.dedup();
    let mut want = vec![FactType::Extreme, FactType::Trend, FactType::Value];
    want.sort();
    assert_eq!(types, want);
}

#[test]
fn simple_question_is_its_own_leaf() {
    let engine = Engine::new(fixtures::cars());
    let tree = engine.decompose("what is the total sales?").unwrap();
    assert!(tree.is_leaf());
}

const PIECES: &[&str] = &[
    "what is the trend of sales",
    "which brand has the highest sales",
    "what is the total sales",
    "how is the sales",
    "show me the sales of Ford",
    "and",
    "in the year with most sales",
    "compare Ford and BMW",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trees_respect_depth_and_leaves_are_nonempty(picks in prop::collection::vec(0..PIECES.len(), 1..5)) {
        let q: Vec<&str> = picks.iter().map(|i| PIECES[*i]).collect();
        let q = q.join(" ") + "?";
        let engine = Engine::new(fixtures::cars());
        if let Ok(tree) = engine.decompose(&q) {
            prop_assert!(tree.depth() <= engine.config.max_depth + 1);
            for l in tree.leaves() {
                prop_assert!(!l.question.trim().is_empty());
            }
        }
    }
}
