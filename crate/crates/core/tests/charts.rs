mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use tabqa_core::chart::{build_chart, layout, registered_combinations, select_chart, AnnotationKind, Base, Datum, GRID_COLUMNS};
use tabqa_core::fact::{evaluate_fact, Agg, FactResult, Measure};
use tabqa_core::{fixtures, schema, ChartSpec, ColumnType, DataFact, FactType, SearchConfig};

/// One evaluated result per fact type, from the corpus fixtures.
fn result_per_type() -> Vec<FactResult> {
    let tables = fixtures::corpus_tables();
    let cfg = SearchConfig::default();
    FactType::ALL
        .iter()
        .map(|&t| {
            tables
                .iter()
                .flat_map(|x| common::enumerate(t.as_str(), t, x, &cfg).0.into_iter().filter_map(|f| evaluate_fact(&f, x).ok()))
                .next()
                .unwrap_or_else(|| panic!("no {t} fact on the fixtures"))
        })
        .collect()
}

#[test]
fn every_type_and_breakdown_kind_gives_a_valid_chart() {
    let validator = jsonschema::validator_for(&schema::schema("chart-spec").unwrap()).unwrap();
    let mut combos = BTreeSet::new();
    for r in result_per_type() {
        for kind in [ColumnType::Categorical, ColumnType::Temporal] {
            let mut r = r.clone();
            r.breakdown_type = Some(kind);
            let c = build_chart(&r, 0.5).unwrap();
            let v = serde_json::to_value(&c).unwrap();
            assert!(validator.is_valid(&v), "{v}");
            assert!(c.dangling_targets().is_empty(), "{}", c.caption);
            assert_eq!((c.base, &c.annotation_set()[..]), {
                let (b, a) = select_chart(r.fact.fact_type, kind);
                let mut a = a.to_vec();
                a.sort();
                (b, &a.clone()[..])
            });
            combos.insert((format!("{:?}", c.base), c.annotation_set()));
        }
    }
    let registered: BTreeSet<_> = registered_combinations().into_iter().map(|(b, a)| (format!("{b:?}"), a)).collect();
    assert_eq!(combos, registered);
    assert_eq!(combos.len(), 15);
}

#[test]
fn charts_of_all_fixture_facts_are_valid_and_registered() {
    let validator = jsonschema::validator_for(&schema::schema("chart-spec").unwrap()).unwrap();
    let registered: BTreeSet<_> = registered_combinations().into_iter().map(|(b, a)| (format!("{b:?}"), a)).collect();
    let mut types = BTreeSet::new();
    for x in fixtures::corpus_tables() {
        for c in common::all_charts(&x) {
            let v = serde_json::to_value(&c).unwrap();
            assert!(validator.is_valid(&v), "{v}");
            assert!(c.dangling_targets().is_empty(), "{}", c.caption);
            assert!(registered.contains(&(format!("{:?}", c.base), c.annotation_set())));
            types.insert(c.fact_type);
        }
    }
    assert_eq!(types.len(), 10);
}

#[test]
fn extreme_on_toy_brands() {
    let x = fixtures::toy_brands();
    let f = DataFact::new(FactType::Extreme).with_measure(Measure::new("sales", Agg::Sum)).with_breakdown("brand").with_focus(["B"]);
    let c = build_chart(&evaluate_fact(&f, &x).unwrap(), 1.0).unwrap();
    assert_eq!(c.base, Base::Bar);
    assert_eq!(c.annotation_set(), vec![AnnotationKind::HighlightColor, AnnotationKind::Pointer]);
    assert!(c.annotations.iter().all(|a| a.targets == ["B"]));
    assert_eq!(c.caption, "B has the highest sales (30) among all brands.");
}

#[test]
fn chart_json_is_stable() {
    let x = fixtures::cars();
    let a: Vec<String> = common::all_charts(&x).iter().map(|c| serde_json::to_string(c).unwrap()).collect();
    let b: Vec<String> = common::all_charts(&x).iter().map(|c| serde_json::to_string(c).unwrap()).collect();
    assert_eq!(a, b);
}

fn spec(relevance: f64) -> ChartSpec {
    ChartSpec {
        base: Base::Bar,
        fact_type: FactType::Value,
        question: "q".into(),
        encodings: vec![],
        data: vec![Datum { key: "all".into(), value: 1.0, x: None }],
        annotations: vec![],
        caption: "c".into(),
        relevance,
    }
}

proptest! {
    #[test]
    fn layout_reads_in_relevance_order(sections in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..8), 1..4)) {
        let input: Vec<(String, Vec<ChartSpec>)> = sections
            .iter()
            .enumerate()
            .map(|(i, rs)| (format!("s{i}"), rs.iter().map(|r| spec(*r)).collect()))
            .collect();
        let d = layout("t", input);
        prop_assert!(d.reading_order_is_relevance_order());
        for (s, rs) in d.sections.iter().zip(&sections) {
            prop_assert_eq!(s.charts.len(), rs.len());
            for c in &s.charts {
                prop_assert!(c.x + c.w <= GRID_COLUMNS);
            }
            for (i, a) in s.charts.iter().enumerate() {
                for b in &s.charts[i + 1..] {
                    let overlap = a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
                    prop_assert!(!overlap);
                }
            }
        }
    }
}
