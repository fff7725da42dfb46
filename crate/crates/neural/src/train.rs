//! Adam training, greedy token accuracy and the finite-difference gradient check.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backprop::{loss_and_grad, pair_loss, EncodedPair, TrainingPair};
use crate::model::{DecodeOptions, Model, ModelConfig, ModelError};
use crate::params::{Adam, SlotId};
use crate::scalar::Scalar;
use crate::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Global gradient-norm cap; zero disables clipping.
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    #[serde(default = "default_amsgrad")]
    pub amsgrad: bool,
}

fn default_batch() -> usize {
    32
}

fn default_amsgrad() -> bool {
    true
}

fn default_clip() -> f64 {
    5.0
}

impl TrainConfig {
    pub fn toy(vocab_size: usize) -> TrainConfig {
        TrainConfig { model: ModelConfig::toy(vocab_size), epochs: 500, batch_size: default_batch(), clip_norm: default_clip(), amsgrad: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean loss per pair, dropout active.
    pub loss: f64,
    /// Greedy-decoding token accuracy on the training pairs.
    pub token_accuracy: f64,
    /// Reference tokens whose probability was floored this epoch.
    pub clamped: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("no training pairs")]
    Empty,
    #[error("loss diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Loss log as CSV with a header row.
pub fn loss_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,loss,token_accuracy\n");
    for e in log {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.token_accuracy));
    }
    out
}

/// Vocabulary over every input and target token of `pairs`.
pub fn build_vocab(pairs: &[TrainingPair]) -> Vocab {
    Vocab::build(pairs.iter().flat_map(|p| p.input.iter().chain(&p.targets.0).chain(&p.targets.1)))
}

/// Fraction of target positions (end marker included) that greedy decoding reproduces.
pub fn token_accuracy<T: Scalar>(m: &Model<T>, pairs: &[EncodedPair]) -> Result<f64, ModelError> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for p in pairs {
        let (a, b) = m.decompose_ids(&p.src, p.condition, DecodeOptions::default())?;
        for (out, target) in [(a, &p.targets[0]), (b, &p.targets[1])] {
            let mut out = out;
            out.push(crate::vocab::EOS_ID);
            total += target.len();
            hit += out.iter().zip(target).filter(|(x, y)| x == y).count();
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

/// Trains from a seeded initialization. Returns the model, the vocabulary (built from the
/// pairs, which overrides `cfg.model.vocab_size`) and one log row per epoch.
pub fn train<T: Scalar>(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<(Model<T>, Vocab, Vec<EpochLog>), TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::Empty);
    }
    let vocab = build_vocab(pairs);
    let mut mc = cfg.model.clone();
    mc.vocab_size = vocab.len();
    let mut model = Model::<T>::new(mc)?;
    let log = train_model(&mut model, &vocab, pairs, cfg)?;
    Ok((model, vocab, log))
}

/// Continues training an existing model in place.
pub fn train_model<T: Scalar>(model: &mut Model<T>, vocab: &Vocab, pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<Vec<EpochLog>, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::Empty);
    }
    let encoded = pairs
        .iter()
        .map(|p| EncodedPair::new(p, vocab, model.config.max_len))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed);
    let mut adam = Adam::new(T::of(model.config.learning_rate), model.params.len());
    adam.amsgrad = cfg.amsgrad;
    let batch = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut clamped = 0;
        for chunk in order.chunks(batch) {
            let mut acc = model.params.zeros_like();
            for &i in chunk {
                let (l, g) = loss_and_grad(model, &encoded[i], Some(&mut rng))?;
                total += l.total().as_f64();
                clamped += l.clamped;
                acc.add_assign(&g);
            }
            acc.scale(T::one() / T::of(chunk.len() as f64));
            if cfg.clip_norm > 0.0 {
                let norm = acc.norm();
                let cap = T::of(cfg.clip_norm);
                if norm > cap {
                    acc.scale(cap / norm);
                }
            }
            if !acc.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            adam.step(&mut model.params, &acc);
            if !model.params.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
        }
        let loss = total / encoded.len() as f64;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let token_accuracy = token_accuracy(model, &encoded)?;
        log.push(EpochLog { epoch, loss, token_accuracy, clamped });
    }
    Ok(log)
}

/// Gradient agreement for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    /// `|a - n| / max(|a|, |n|)` over the group's gradient vectors.
    pub rel_error: f64,
    /// Largest elementwise `|a - n|`.
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub groups: Vec<GroupError>,
}

impl GradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.rel_error).fold(0.0, f64::max)
    }

    pub fn group(&self, name: &str) -> Option<&GroupError> {
        self.groups.iter().find(|g| g.name == name)
    }
}

/// Analytic gradients against central differences `(f(x+eps) - f(x-eps)) / 2eps`, per
/// parameter group. Only `groups` are checked when given. Dropout is off.
pub fn grad_check<T: Scalar>(m: &Model<T>, pair: &EncodedPair, eps: f64, groups: Option<&[&str]>) -> Result<GradCheck, ModelError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ModelError::Config(format!("finite-difference step {eps} must be positive")));
    }
    let (_, analytic) = loss_and_grad(m, pair, None)?;
    let mut probe = m.clone();
    let h = T::of(eps);
    let mut out = Vec::new();
    let ids: Vec<SlotId> = (0..m.params.slots.len())
        .filter(|&i| groups.map_or(true, |g| g.contains(&m.params.slots[i].name.as_str())))
        .collect();
    for id in ids {
        let slot = m.params.slots[id].clone();
        let (mut diff, mut na, mut nn, mut worst) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for k in 0..slot.len() {
            let at = slot.offset + k;
            let orig = probe.params.values[at];
            probe.params.values[at] = orig + h;
            let up = pair_loss(&probe, pair)?.total();
            probe.params.values[at] = orig - h;
            let down = pair_loss(&probe, pair)?.total();
            probe.params.values[at] = orig;
            let numeric = ((up - down) / (h + h)).as_f64();
            let a = analytic.values[at].as_f64();
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
            worst = worst.max((a - numeric).abs());
        }
        let denom = na.sqrt().max(nn.sqrt());
        let rel_error = if denom == 0.0 { 0.0 } else { diff.sqrt() / denom };
        out.push(GroupError { name: slot.name, rel_error, max_abs_error: worst });
    }
    Ok(GradCheck { groups: out })
}
