//! Versioned JSON checkpoints.

use serde::{Deserialize, Serialize};

use crate::model::{layout, Model, ModelConfig, ModelError};
use crate::params::{ParamSet, Slot};
use crate::scalar::Scalar;
use crate::vocab::Vocab;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub version: u32,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub slots: Vec<Slot>,
    pub values: Vec<T>,
}

pub fn to_json<T: Scalar>(m: &Model<T>, vocab: &Vocab) -> String {
    let c = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: m.config.clone(),
        vocab: vocab.clone(),
        slots: m.params.slots.clone(),
        values: m.params.values.clone(),
    };
    serde_json::to_string(&c).expect("checkpoint serializes")
}

pub fn from_json<T: Scalar>(text: &str) -> Result<(Model<T>, Vocab), ModelError> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let c: Checkpoint<T> = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if c.version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {}", c.version)));
    }
    c.config.validate()?;
    if c.vocab.len() != c.config.vocab_size || !c.vocab.has_markers() {
        return Err(bad("vocabulary does not match the config".into()));
    }
    let (expected, ids): (ParamSet<T>, _) = layout(&c.config);
    if expected.slots != c.slots || expected.len() != c.values.len() {
        return Err(bad("parameter layout does not match the config".into()));
    }
    let params = ParamSet { slots: c.slots, values: c.values };
    if !params.is_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    Ok((Model { config: c.config, params, ids }, c.vocab))
}
