//! Model parameters and the forward pass: embedding, stacked bidirectional GRU encoder,
//! decomposition heads, attention decoder and copy gate.

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use tabqa_core::question::QuestionClass;

use crate::params::{ParamSet, SlotId};
use crate::scalar::{sigmoid, Scalar};
use crate::vocab::{SourceMap, EOS_ID, SOS_ID, UNK_ID};

pub const DEFAULT_MAX_LEN: usize = 60;
/// Floor applied to the reference-token probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Architecture variants, each adding one component to the previous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Encoder, decomposition heads and a plain decoder.
    Decomposer,
    /// Adds the condition vector and the classifier head.
    Classifier,
    /// Adds decoder attention.
    Attention,
    /// Adds the copy gate.
    #[default]
    Copy,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Decomposer, Variant::Classifier, Variant::Attention, Variant::Copy];

    pub fn uses_condition(self) -> bool {
        self != Variant::Decomposer
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, Variant::Attention | Variant::Copy)
    }

    pub fn uses_copy(self) -> bool {
        self == Variant::Copy
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Decomposer => "decomposer",
            Variant::Classifier => "classifier",
            Variant::Attention => "attention",
            Variant::Copy => "copy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub dropout: f64,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub variant: Variant,
}

fn default_max_len() -> usize {
    DEFAULT_MAX_LEN
}

impl ModelConfig {
    /// Full-size settings.
    pub fn full(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: 256,
            hidden_dim: 256,
            encoder_layers: 2,
            dropout: 0.1,
            max_len: DEFAULT_MAX_LEN,
            learning_rate: 1e-4,
            seed: 42,
            variant: Variant::Copy,
        }
    }

    /// Desk-scale settings for overfitting a small corpus: no dropout, larger step.
    pub fn toy(vocab_size: usize) -> ModelConfig {
        ModelConfig { embed_dim: 16, hidden_dim: 16, dropout: 0.0, learning_rate: 0.01, ..ModelConfig::full(vocab_size) }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("encoder_layers", self.encoder_layers),
            ("max_len", self.max_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("input length {len} outside 1..={max}")]
    Length { len: usize, max: usize },
    #[error("simple questions have no condition vector")]
    Condition,
    #[error("token id {0} out of range")]
    TokenId(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruIds {
    pub w_r: SlotId,
    pub u_r: SlotId,
    pub b_r: SlotId,
    pub w_z: SlotId,
    pub u_z: SlotId,
    pub b_z: SlotId,
    pub w_n: SlotId,
    pub u_n: SlotId,
    pub b_n: SlotId,
}

/// Slot ids of every parameter group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ids {
    pub emb: SlotId,
    /// Forward and backward cell per encoder layer.
    pub enc: Vec<[GruIds; 2]>,
    pub proj_w: SlotId,
    pub proj_b: SlotId,
    pub cls_w: SlotId,
    pub cls_b: SlotId,
    pub q_w: [SlotId; 2],
    pub q_b: [SlotId; 2],
    pub dec: GruIds,
    pub attn: SlotId,
    pub out_w: SlotId,
    pub out_b: SlotId,
    pub vc: [SlotId; 3],
}

fn gru_slots<T: Scalar>(p: &mut ParamSet<T>, pre: &str, input: usize, hidden: usize) -> GruIds {
    let mut m = |n: &str, c: usize| p.add(format!("{pre}.{n}"), hidden, c);
    GruIds {
        w_r: m("W_r", input),
        u_r: m("U_r", hidden),
        b_r: m("b_r", 1),
        w_z: m("W_z", input),
        u_z: m("U_z", hidden),
        b_z: m("b_z", 1),
        w_n: m("W_n", input),
        u_n: m("U_n", hidden),
        b_n: m("b_n", 1),
    }
}

/// Zero-filled parameters and their slot ids for `cfg`.
pub fn layout<T: Scalar>(cfg: &ModelConfig) -> (ParamSet<T>, Ids) {
    let (v, e, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
    let mut p = ParamSet::default();
    let emb = p.add("W_emb", v, e);
    let enc = (0..cfg.encoder_layers)
        .map(|l| {
            let input = if l == 0 { e } else { 2 * h };
            [gru_slots(&mut p, &format!("enc{l}.fw"), input, h), gru_slots(&mut p, &format!("enc{l}.bw"), input, h)]
        })
        .collect();
    let proj_w = p.add("W_proj", h, 2 * h);
    let proj_b = p.add("b_proj", h, 1);
    let cls_w = p.add("W_c", 2, h);
    let cls_b = p.add("b_c", 2, 1);
    let q_w = [p.add("W_q1", h, h + 2), p.add("W_q2", h, h + 2)];
    let q_b = [p.add("b_q1", h, 1), p.add("b_q2", h, 1)];
    let dec = gru_slots(&mut p, "dec", e, h);
    let attn = p.add("W_attn", h, 2 * h);
    let out_w = p.add("W_out", v, h);
    let out_b = p.add("b_out", v, 1);
    let vc = [p.add("v_c1", h, 1), p.add("v_c2", h, 1), p.add("v_c3", e, 1)];
    (p, Ids { emb, enc, proj_w, proj_b, cls_w, cls_b, q_w, q_b, dec, attn, out_w, out_b, vc })
}

/// `[0, 1]` for Type-I, `[1, 0]` for Type-II.
pub fn condition_vector<T: Scalar>(class: QuestionClass) -> Result<[T; 2], ModelError> {
    match class {
        QuestionClass::ComplexTypeI => Ok([T::zero(), T::one()]),
        QuestionClass::ComplexTypeII => Ok([T::one(), T::zero()]),
        QuestionClass::Simple => Err(ModelError::Condition),
    }
}

/// Index of the hot entry of [`condition_vector`].
pub fn condition_index(class: QuestionClass) -> Result<usize, ModelError> {
    match class {
        QuestionClass::ComplexTypeI => Ok(1),
        QuestionClass::ComplexTypeII => Ok(0),
        QuestionClass::Simple => Err(ModelError::Condition),
    }
}

pub fn softmax<T: Scalar>(x: ArrayView1<T>) -> Array1<T> {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    let e = x.mapv(|v| (v - m).exp());
    let s: T = e.sum();
    e / s
}

pub(crate) fn concat<T: Scalar>(a: ArrayView1<T>, b: ArrayView1<T>) -> Array1<T> {
    a.iter().chain(b.iter()).copied().collect()
}

#[derive(Debug, Clone)]
pub(crate) struct GruCache<T> {
    pub x: Array1<T>,
    pub h: Array1<T>,
    pub r: Array1<T>,
    pub z: Array1<T>,
    pub n: Array1<T>,
    pub rh: Array1<T>,
}

pub(crate) fn gru_step<T: Scalar>(p: &ParamSet<T>, g: &GruIds, x: Array1<T>, h: Array1<T>) -> (Array1<T>, GruCache<T>) {
    let r = (p.mat(g.w_r).dot(&x) + p.mat(g.u_r).dot(&h) + p.vec(g.b_r)).mapv(sigmoid);
    let z = (p.mat(g.w_z).dot(&x) + p.mat(g.u_z).dot(&h) + p.vec(g.b_z)).mapv(sigmoid);
    let rh = &r * &h;
    let n = (p.mat(g.w_n).dot(&x) + p.mat(g.u_n).dot(&rh) + p.vec(g.b_n)).mapv(T::tanh);
    let out = z.mapv(|v| T::one() - v) * &n + &z * &h;
    (out, GruCache { x, h, r, z, n, rh })
}

/// Inverted dropout: a keep mask scaled by `1 / (1 - p)`.
pub(crate) fn dropout_mask<T: Scalar>(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Array1<T> {
    let keep = T::of(1.0 / (1.0 - p));
    (0..len).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect()
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<T> {
    pub masks: Vec<Option<Array1<T>>>,
    pub fw: Vec<GruCache<T>>,
    pub bw: Vec<GruCache<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct EncCache<T> {
    pub ids: Vec<usize>,
    pub layers: Vec<LayerCache<T>>,
    pub outputs: Vec<Array1<T>>,
    pub summary_in: Array1<T>,
}

/// Encoder output: one state per token and the summary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding<T> {
    pub states: Vec<Array1<T>>,
    pub h: Array1<T>,
}

/// Attention weights, context and attentional state for one decoder step.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub weights: Array1<T>,
    pub context: Array1<T>,
    pub state: Array1<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct StepCache<T> {
    pub prev: usize,
    pub w: Array1<T>,
    pub mask: Option<Array1<T>>,
    pub gru: GruCache<T>,
    pub h: Array1<T>,
    pub att: Option<Attention<T>>,
    pub pv: Array1<T>,
    pub pc: T,
}

/// Per-step output over the extended vocabulary (`V` words then the source's OOV words).
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    pub dist: Array1<T>,
    pub gate: T,
    pub attention: Option<Array1<T>>,
    pub state: Array1<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecodeOptions {
    /// Overrides the copy gate at every step. Needs an attention variant.
    pub force_gate: Option<f64>,
    /// Step cap; the config's `max_len` when absent.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamSet<T>,
    pub ids: Ids,
}

impl<T: Scalar> Model<T> {
    /// All parameters zero.
    pub fn zeroed(config: ModelConfig) -> Result<Model<T>, ModelError> {
        config.validate()?;
        let (params, ids) = layout(&config);
        Ok(Model { config, params, ids })
    }

    /// Matrices uniform in `±1/sqrt(hidden)`, embeddings in `±0.1`, biases zero.
    pub fn new(config: ModelConfig) -> Result<Model<T>, ModelError> {
        let k = 1.0 / (config.hidden_dim as f64).sqrt();
        Model::seeded(config, k, 0.1)
    }

    /// Matrices and copy vectors uniform in `±bound`, embeddings in `±emb_bound`, biases zero.
    pub fn seeded(config: ModelConfig, bound: f64, emb_bound: f64) -> Result<Model<T>, ModelError> {
        let mut m = Model::zeroed(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(m.config.seed);
        for id in 0..m.params.slots.len() {
            let s = &m.params.slots[id];
            let b = if s.name == "W_emb" {
                emb_bound
            } else if s.cols == 1 && !s.name.starts_with("v_c") {
                continue;
            } else {
                bound
            };
            if b <= 0.0 {
                continue;
            }
            for v in m.params.group_mut(id) {
                *v = T::of(rng.random_range(-b..b));
            }
        }
        Ok(m)
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden_dim
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ModelError> {
        if ids.is_empty() || ids.len() > self.config.max_len {
            return Err(ModelError::Length { len: ids.len(), max: self.config.max_len });
        }
        match ids.iter().find(|&&i| i >= self.config.vocab_size) {
            Some(&i) => Err(ModelError::TokenId(i)),
            None => Ok(()),
        }
    }

    pub(crate) fn encode_cached(&self, ids: &[usize], mut rng: Option<&mut ChaCha8Rng>) -> (Encoding<T>, EncCache<T>) {
        let p = &self.params;
        let h = self.hidden();
        let n = ids.len();
        let mut inputs: Vec<Array1<T>> = ids.iter().map(|&i| p.mat(self.ids.emb).row(i).to_owned()).collect();
        let mut layers = Vec::with_capacity(self.ids.enc.len());
        let mut last = (Vec::new(), Vec::new());
        for cells in &self.ids.enc {
            let masks: Vec<Option<Array1<T>>> = inputs
                .iter()
                .map(|x| match rng.as_deref_mut() {
                    Some(r) if self.config.dropout > 0.0 => Some(dropout_mask(x.len(), self.config.dropout, r)),
                    _ => None,
                })
                .collect();
            for (x, m) in inputs.iter_mut().zip(&masks) {
                if let Some(m) = m {
                    *x = &*x * m;
                }
            }
            let mut fw = Vec::with_capacity(n);
            let mut fh = Vec::with_capacity(n);
            let mut state = Array1::zeros(h);
            for x in &inputs {
                let (out, c) = gru_step(p, &cells[0], x.clone(), state);
                fw.push(c);
                fh.push(out.clone());
                state = out;
            }
            let mut bw = vec![None; n];
            let mut bh = vec![Array1::zeros(h); n];
            let mut state = Array1::zeros(h);
            for i in (0..n).rev() {
                let (out, c) = gru_step(p, &cells[1], inputs[i].clone(), state);
                bw[i] = Some(c);
                bh[i] = out.clone();
                state = out;
            }
            inputs = (0..n).map(|i| concat(fh[i].view(), bh[i].view())).collect();
            layers.push(LayerCache { masks, fw, bw: bw.into_iter().map(|c| c.expect("filled")).collect() });
            last = (fh, bh);
        }
        let summary_in = concat(last.0[n - 1].view(), last.1[0].view());
        let w = p.mat(self.ids.proj_w);
        let b = p.vec(self.ids.proj_b);
        let states = inputs.iter().map(|o| w.dot(o) + b).collect();
        let hs = w.dot(&summary_in) + b;
        (Encoding { states, h: hs }, EncCache { ids: ids.to_vec(), layers, outputs: inputs, summary_in })
    }

    /// Per-token states (projected to `hidden_dim`) and the summary vector.
    pub fn encode(&self, ids: &[usize]) -> Result<Encoding<T>, ModelError> {
        self.check_ids(ids)?;
        Ok(self.encode_cached(ids, None).0)
    }

    pub(crate) fn h_star(&self, h: &Array1<T>, c: [T; 2]) -> Array1<T> {
        let c = if self.config.variant.uses_condition() { c } else { [T::zero(); 2] };
        concat(h.view(), ArrayView1::from(&c[..]))
    }

    /// The two decomposition states `tanh(W_qi [h; c] + b_qi)`.
    pub fn split(&self, h: &Array1<T>, c: [T; 2]) -> (Array1<T>, Array1<T>) {
        let hs = self.h_star(h, c);
        let q = |i: usize| (self.params.mat(self.ids.q_w[i]).dot(&hs) + self.params.vec(self.ids.q_b[i])).mapv(T::tanh);
        (q(0), q(1))
    }

    /// Classifier head probabilities, `[Type-II, Type-I]`.
    pub fn classify(&self, h: &Array1<T>) -> Array1<T> {
        let logits = self.params.mat(self.ids.cls_w).dot(h) + self.params.vec(self.ids.cls_b);
        softmax(logits.view())
    }

    /// Dot-product attention of `h_t` over the encoder states.
    pub fn attend(&self, h_t: &Array1<T>, states: &[Array1<T>]) -> Attention<T> {
        let scores: Array1<T> = states.iter().map(|s| h_t.dot(s)).collect();
        let weights = softmax(scores.view());
        let mut context = Array1::zeros(h_t.len());
        for (a, s) in weights.iter().zip(states) {
            context.scaled_add(*a, s);
        }
        let state = self.params.mat(self.ids.attn).dot(&concat(context.view(), h_t.view())).mapv(T::tanh);
        Attention { weights, context, state }
    }

    /// `sigmoid(v_c1.h_t + v_c2.ctx + v_c3.w_prev)`.
    pub fn copy_gate(&self, h_t: &Array1<T>, ctx: &Array1<T>, w_prev: &Array1<T>) -> T {
        let p = &self.params;
        sigmoid(p.vec(self.ids.vc[0]).dot(h_t) + p.vec(self.ids.vc[1]).dot(ctx) + p.vec(self.ids.vc[2]).dot(w_prev))
    }

    pub(crate) fn embed_prev(&self, ext_id: usize) -> usize {
        if ext_id < self.config.vocab_size {
            ext_id
        } else {
            // copied OOV words feed back as <unk>
            UNK_ID
        }
    }

    pub(crate) fn step_cached(
        &self,
        prev_ext: usize,
        h_prev: Array1<T>,
        states: &[Array1<T>],
        rng: Option<&mut ChaCha8Rng>,
    ) -> (Array1<T>, StepCache<T>) {
        let p = &self.params;
        let prev = self.embed_prev(prev_ext);
        let mut w = p.mat(self.ids.emb).row(prev).to_owned();
        let mask = match rng {
            Some(r) if self.config.dropout > 0.0 => Some(dropout_mask(w.len(), self.config.dropout, r)),
            _ => None,
        };
        if let Some(m) = &mask {
            w = &w * m;
        }
        let (h, gru) = gru_step(p, &self.ids.dec, w.clone(), h_prev);
        let variant = self.config.variant;
        let att = variant.uses_attention().then(|| self.attend(&h, states));
        let out_in = att.as_ref().map_or(&h, |a| &a.state);
        let logits = p.mat(self.ids.out_w).dot(out_in) + p.vec(self.ids.out_b);
        let pv = softmax(logits.view());
        let pc = match (&att, variant.uses_copy()) {
            (Some(a), true) => self.copy_gate(&h, &a.context, &w),
            _ => T::zero(),
        };
        (h.clone(), StepCache { prev, w, mask, gru, h, att, pv, pc })
    }

    /// Mixes the vocabulary softmax with the attention mass scattered onto source ids.
    pub fn mix(pv: &Array1<T>, gate: T, attention: Option<&Array1<T>>, src_ext: &[usize], ext_size: usize) -> Array1<T> {
        let mut dist = Array1::zeros(ext_size.max(pv.len()));
        for (d, &v) in dist.iter_mut().zip(pv.iter()) {
            *d = (T::one() - gate) * v;
        }
        if let Some(a) = attention {
            for (&w, &j) in a.iter().zip(src_ext) {
                dist[j] = dist[j] + gate * w;
            }
        }
        dist
    }

    /// One inference step from `prev_ext` and `h_prev`.
    pub fn step(&self, prev_ext: usize, h_prev: Array1<T>, states: &[Array1<T>], src: &SourceMap, force_gate: Option<f64>) -> StepOutput<T> {
        let (h, c) = self.step_cached(prev_ext, h_prev, states, None);
        let att = c.att.as_ref().map(|a| a.weights.clone());
        let gate = match (force_gate, &att) {
            (Some(g), Some(_)) => T::of(g),
            _ => c.pc,
        };
        let dist = Model::mix(&c.pv, gate, att.as_ref(), &src.ext, self.config.vocab_size + src.oov.len());
        StepOutput { dist, gate, attention: att, state: h }
    }

    /// Greedy decoding from `h_q` until `<eos>` or the step cap; returns extended ids
    /// without the end marker. Ties go to the lowest id.
    pub fn decode(&self, h_q: &Array1<T>, states: &[Array1<T>], src: &SourceMap, opts: DecodeOptions) -> Vec<usize> {
        let cap = opts.max_steps.unwrap_or(self.config.max_len);
        let mut out = Vec::new();
        let mut prev = SOS_ID;
        let mut h = h_q.clone();
        while out.len() < cap {
            let s = self.step(prev, h, states, src, opts.force_gate);
            let mut best = 0;
            for (i, &v) in s.dist.iter().enumerate() {
                if v > s.dist[best] {
                    best = i;
                }
            }
            if best == EOS_ID {
                break;
            }
            out.push(best);
            prev = best;
            h = s.state;
        }
        out
    }

    /// Decodes both sub-questions for a source sequence, as extended ids.
    pub fn decompose_ids(&self, src: &SourceMap, class: QuestionClass, opts: DecodeOptions) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
        let enc = self.encode(&src.ids)?;
        let c = condition_vector(class)?;
        let (q1, q2) = self.split(&enc.h, c);
        Ok((self.decode(&q1, &enc.states, src, opts), self.decode(&q2, &enc.states, src, opts)))
    }
}
