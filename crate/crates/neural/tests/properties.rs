use ndarray::Array1;
use proptest::prelude::*;
use tabqa_neural::model::softmax;
use tabqa_neural::vocab::{SourceMap, Vocab};
use tabqa_neural::*;

fn vocab() -> Vocab {
    Vocab::build((0..24).map(|i| format!("w{i}")))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_sums_to_one(xs in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let s = softmax(Array1::from(xs).view());
        prop_assert!((s.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(s.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn mixed_step_distribution_sums_to_one(
        seed in 0u64..1000,
        words in prop::collection::vec(0usize..40, 1..12),
        gate in prop::option::of(0.0f64..=1.0),
    ) {
        let v = vocab();
        let mut cfg = ModelConfig::toy(v.len());
        cfg.seed = seed;
        let m = RealModel::new(cfg).unwrap();
        // ids >= 24 become out-of-vocabulary words
        let tokens: Vec<String> = words.iter().map(|&i| if i < 24 { format!("w{i}") } else { format!("oov{i}") }).collect();
        let src = SourceMap::new(&tokens, &v);
        let enc = m.encode(&src.ids).unwrap();
        let s = m.step(0, enc.h.clone(), &enc.states, &src, gate);
        prop_assert_eq!(s.dist.len(), v.len() + src.oov.len());
        prop_assert!((s.dist.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(s.gate >= 0.0 && s.gate <= 1.0);
    }

    #[test]
    fn states_match_input_length(seed in 0u64..1000, n in 1usize..=60) {
        let mut cfg = ModelConfig::toy(30);
        cfg.seed = seed;
        let m = RealModel::new(cfg).unwrap();
        let ids: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 30).collect();
        let e = m.encode(&ids).unwrap();
        prop_assert_eq!(e.states.len(), n);
        prop_assert!(e.states.iter().all(|s| s.len() == 16 && s.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn source_map_round_trips_words(words in prop::collection::vec(0usize..40, 1..20)) {
        let v = vocab();
        let tokens: Vec<String> = words.iter().map(|&i| if i < 24 { format!("w{i}") } else { format!("oov{i}") }).collect();
        let src = SourceMap::new(&tokens, &v);
        for (t, &e) in tokens.iter().zip(&src.ext) {
            prop_assert_eq!(src.word(e, &v), t.as_str());
            prop_assert_eq!(src.target_id(t, &v), e);
        }
        prop_assert!(src.ids.iter().all(|&i| i < v.len()));
    }
}
