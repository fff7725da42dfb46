use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabqa_core::decompose::{resolve, ResolveOptions};
use tabqa_core::fixtures;
use tabqa_core::question::QuestionClass;
use tabqa_core::similarity::ReferenceProvider;
use tabqa_neural::data::{toy_corpus, TOY_PAIRS};
use tabqa_neural::model::Variant;
use tabqa_neural::train::{build_vocab, loss_csv};
use tabqa_neural::*;

fn short(epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::toy(0);
    c.epochs = epochs;
    c
}

#[test]
fn toy_corpus_is_seeded_and_mixed() {
    let a = toy_corpus(42);
    assert_eq!(a.len(), TOY_PAIRS);
    assert_eq!(a, toy_corpus(42));
    assert_ne!(a, toy_corpus(7));
    assert!(a.iter().any(|p| p.condition == QuestionClass::ComplexTypeI));
    assert!(a.iter().any(|p| p.condition == QuestionClass::ComplexTypeII));
    assert!(a.iter().all(|p| p.input.len() <= 60 && p.input.contains(&"<N>".to_string())));
}

#[test]
fn zero_epochs_return_the_initial_state() {
    let pairs = toy_corpus(42);
    let (m, v, log) = train::<f64>(&pairs, &short(0)).unwrap();
    assert!(log.is_empty());
    let mut cfg = short(0).model;
    cfg.vocab_size = v.len();
    assert_eq!(m, RealModel::new(cfg).unwrap());
}

#[test]
fn same_seed_gives_identical_runs() {
    let pairs = &toy_corpus(42)[..8];
    let (m1, _, l1) = train::<f64>(pairs, &short(4)).unwrap();
    let (m2, _, l2) = train::<f64>(pairs, &short(4)).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(m1.params.values, m2.params.values);
    let mut other = short(4);
    other.model.seed = 43;
    let (_, _, l3) = train::<f64>(pairs, &other).unwrap();
    assert_ne!(l1, l3);
}

#[test]
fn loss_trend_falls_over_fifty_epochs() {
    let pairs = toy_corpus(42);
    let (m, _, log) = train::<f64>(&pairs, &short(50)).unwrap();
    assert!(m.params.is_finite());
    let ma: Vec<f64> = log.windows(5).map(|w| w.iter().map(|e| e.loss).sum::<f64>() / 5.0).collect();
    for w in ma.windows(2) {
        assert!(w[1] < w[0], "{ma:?}");
    }
    assert!(log.iter().all(|e| e.clamped == 0));
}

#[test]
fn every_variant_trains() {
    let pairs = &toy_corpus(42)[..6];
    for v in Variant::ALL {
        let mut c = short(8);
        c.model.variant = v;
        let (m, _, log) = train::<f64>(pairs, &c).unwrap();
        assert!(m.params.is_finite());
        assert!(log.last().unwrap().loss < log[0].loss, "{v:?}");
    }
}

#[test]
fn non_finite_parameters_report_divergence() {
    let pairs = &toy_corpus(42)[..4];
    let v = build_vocab(pairs);
    let mut m = RealModel::new(ModelConfig::toy(v.len())).unwrap();
    m.params.values[0] = f64::NAN;
    assert_eq!(train_model(&mut m, &v, pairs, &short(3)), Err(TrainError::Diverged { epoch: 1 }));
    assert_eq!(train::<f64>(&[], &short(1)).unwrap_err(), TrainError::Empty);
}

#[test]
fn dropout_only_in_training_mode() {
    let pairs = toy_corpus(42);
    let v = build_vocab(&pairs);
    let mut cfg = ModelConfig::toy(v.len());
    cfg.dropout = 0.5;
    let m = RealModel::new(cfg).unwrap();
    let e = EncodedPair::new(&pairs[0], &v, 60).unwrap();
    let a = pair_loss(&m, &e).unwrap();
    assert_eq!(a, pair_loss(&m, &e).unwrap());
    let (b, _) = loss_and_grad(&m, &e, None).unwrap();
    assert_eq!(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (c, _) = loss_and_grad(&m, &e, Some(&mut rng)).unwrap();
    assert_ne!(a.nll, c.nll);
}

#[test]
fn loss_log_csv() {
    let log = [EpochLog { epoch: 1, loss: 2.5, token_accuracy: 0.25, clamped: 0 }];
    assert_eq!(loss_csv(&log), "epoch,loss,token_accuracy\n1,2.5,0.25\n");
}

#[test]
fn neural_backend_plugs_into_resolve() {
    let pairs = toy_corpus(42);
    let (m, v, _) = train::<f64>(&pairs, &short(3)).unwrap();
    let json = tabqa_neural::checkpoint::to_json(&m, &v);
    let backend = NeuralDecomposer::from_checkpoint(&json).unwrap();
    assert_eq!(backend.vocab(), &v);
    let x = fixtures::cars();
    let p = ReferenceProvider::fit(&tabqa_core::pipeline::template_corpus(&x));
    let tree = resolve("Compare the sales of Ford and Toyota", &x, &backend, &p, ResolveOptions::default()).unwrap();
    assert!(!tree.is_leaf());
    assert!(matches!(tree.backend.as_deref(), Some("neural") | Some("rule")));
}
