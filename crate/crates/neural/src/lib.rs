//! Recurrent question decomposer: a bidirectional GRU encoder over the formulated question,
//! a condition vector for the question type, two decomposition heads and a shared attention
//! decoder with a copy gate. Trained with Adam on the word-level negative log-likelihood.
//!
//! Everything is generic over [`Scalar`]; [`Real`] is the precision used by the backend
//! and the tests.

pub mod backend;
pub mod backprop;
pub mod checkpoint;
pub mod data;
pub mod model;
pub mod params;
pub mod scalar;
pub mod train;
pub mod vocab;

pub use backend::NeuralDecomposer;
pub use backprop::{loss_and_grad, pair_loss, sequence_nll, EncodedPair, PairLoss, TrainingPair};
pub use model::{condition_vector, DecodeOptions, Model, ModelConfig, ModelError, Variant};
pub use scalar::Scalar;
pub use train::{grad_check, token_accuracy, train, train_model, EpochLog, TrainConfig, TrainError};
pub use vocab::{SourceMap, Vocab};

pub type Real = f64;
pub type RealModel = Model<Real>;
