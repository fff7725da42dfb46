mod common;

use proptest::prelude::*;
use tabqa_core::fixtures;
use tabqa_core::pipeline::template_corpus;
use tabqa_core::search::{search, SearchError};
use tabqa_core::table::{load_table, LoadOptions};
use tabqa_core::{FactType, ReferenceProvider, SearchConfig};

#[test]
fn widened_beam_matches_exhaustive_ranking() {
    for x in fixtures::small_tables().iter().take(3) {
        let p = ReferenceProvider::fit(&template_corpus(x));
        for t in FactType::ALL {
            let q = common::question_for(t, x);
            let base = SearchConfig::default();
            let (oracle, nodes) = common::exhaustive(&q, t, x, &base, &p);
            let cfg = SearchConfig { beam_width: nodes, ..base };
            match search(&q, t, x, &cfg, &p) {
                Ok(found) => {
                    common::same_facts(&found, &oracle, 1e-12).unwrap_or_else(|e| panic!("{} {t}: {e}", x.name()));
                    assert!(found.windows(2).all(|w| w[0].score >= w[1].score));
                }
                Err(SearchError::Unsatisfiable(_)) => assert!(oracle.is_empty(), "{} {t}", x.name()),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn trend_needs_a_temporal_column() {
    let x = load_table(b"brand,sales\nA,1\nB,2\nC,3\n", &LoadOptions::named("nt")).unwrap();
    let p = ReferenceProvider::fit(&template_corpus(&x));
    let err = search("trend of sales", FactType::Trend, &x, &SearchConfig::default(), &p).unwrap_err();
    assert_eq!(err, SearchError::Unsatisfiable("no temporal column".into()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beam_results_are_bounded_and_never_beat_the_oracle(table in 0usize..10, ti in 0usize..10, k in 1usize..8) {
        let x = &fixtures::small_tables()[table];
        let t = FactType::ALL[ti];
        let p = ReferenceProvider::fit(&template_corpus(x));
        let q = common::question_for(t, x);
        let cfg = SearchConfig::with_beam(k);
        let (oracle, _) = common::exhaustive(&q, t, x, &cfg, &p);
        match search(&q, t, x, &cfg, &p) {
            Ok(found) => {
                prop_assert!(found.len() <= k);
                prop_assert!(found.windows(2).all(|w| w[0].score >= w[1].score));
                prop_assert!(found[0].score <= oracle[0].score + 1e-12);
                for f in &found {
                    prop_assert!(oracle.iter().any(|o| o.fact == f.fact));
                }
            }
            Err(e) => prop_assert!(matches!(e, SearchError::Unsatisfiable(_)), "{}", e),
        }
    }
}
