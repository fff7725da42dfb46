mod common;

use proptest::prelude::*;
use tabqa_core::corpus::{validate_pair, Rejection, Verdict};
use tabqa_core::fixtures;
use tabqa_core::pipeline::template_corpus;
use tabqa_core::similarity::{combined_score, levenshtein, semantic_sim, text_sim};
use tabqa_core::ReferenceProvider;

fn provider() -> ReferenceProvider {
    ReferenceProvider::fit(&template_corpus(&fixtures::cars()))
}

#[test]
fn levenshtein_known_pairs() {
    assert_eq!(levenshtein("kitten", "sitting"), 3);
    assert_eq!(levenshtein("", "abc"), 3);
    assert_eq!(levenshtein("flaw", "lawn"), 2);
    assert_eq!(levenshtein("über", "uber"), 1);
}

#[test]
fn text_sim_of_known_pair() {
    // 1 - 3/7
    assert!((text_sim("kitten", "sitting") - 4.0 / 7.0).abs() < 1e-15);
    assert_eq!(text_sim("", ""), 1.0);
}

#[test]
fn copy_is_rejected_before_scoring() {
    let p = provider();
    let q = "what is the total sales over year?";
    assert_eq!(validate_pair(q, q, &p).unwrap(), Verdict::Reject(Rejection::Copy));
    assert!(combined_score(q, q, &p).unwrap() <= 1e-12);
}

#[test]
fn short_rephrasing_is_rejected() {
    let p = provider();
    assert_eq!(validate_pair("what is the total sales?", "sales total", &p).unwrap(), Verdict::Reject(Rejection::TooShort));
}

#[test]
fn reordered_paraphrase_is_accepted() {
    let p = provider();
    let v = validate_pair("which brand has the highest sales?", "the highest sales belong to which brand?", &p).unwrap();
    assert_eq!(v, Verdict::Accept);
}

proptest! {
    #[test]
    fn levenshtein_matches_full_matrix(a in "[a-dé ]{0,40}", b in "[a-dé ]{0,40}") {
        prop_assert_eq!(levenshtein(&a, &b), common::edit_distance(&a, &b));
    }

    #[test]
    fn levenshtein_is_a_metric(a in "[ab]{0,12}", b in "[ab]{0,12}", c in "[ab]{0,12}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn text_sim_in_unit_interval(a in ".{0,30}", b in ".{0,30}") {
        let s = text_sim(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, text_sim(&b, &a));
        prop_assert_eq!(text_sim(&a, &a), 1.0);
    }

    #[test]
    fn semantic_sim_is_symmetric_and_bounded(a in "[a-z ]{1,30}", b in "[a-z ]{1,30}") {
        let p = provider();
        let ab = semantic_sim(&a, &b, &p).unwrap();
        let ba = semantic_sim(&b, &a, &p).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}
