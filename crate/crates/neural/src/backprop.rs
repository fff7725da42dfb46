//! Training pairs, the sequence NLL and its analytic gradient.

use ndarray::{s, Array1, ArrayView1, ArrayViewMut2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use tabqa_core::question::QuestionClass;

use crate::model::{condition_index, condition_vector, GruCache, GruIds, Model, ModelError, PROB_FLOOR};
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::vocab::{SourceMap, Vocab, EOS_ID, SOS_ID, UNK_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    /// Serialized question tokens, schema markers included.
    pub input: Vec<String>,
    pub condition: QuestionClass,
    pub targets: (Vec<String>, Vec<String>),
}

/// A pair mapped to ids. Targets carry extended ids and end with `<eos>`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub src: SourceMap,
    pub condition: QuestionClass,
    pub targets: [Vec<usize>; 2],
}

impl EncodedPair {
    pub fn new(p: &TrainingPair, v: &Vocab, max_len: usize) -> Result<EncodedPair, ModelError> {
        if p.input.is_empty() || p.input.len() > max_len {
            return Err(ModelError::Length { len: p.input.len(), max: max_len });
        }
        condition_index(p.condition)?;
        let src = SourceMap::new(&p.input, v);
        let mut targets = [Vec::new(), Vec::new()];
        for (t, words) in targets.iter_mut().zip([&p.targets.0, &p.targets.1]) {
            if words.len() > max_len {
                return Err(ModelError::Length { len: words.len(), max: max_len });
            }
            t.extend(words.iter().map(|w| src.target_id(w, v)));
            t.push(EOS_ID);
        }
        Ok(EncodedPair { src, condition: p.condition, targets })
    }

    pub fn target_tokens(&self) -> usize {
        self.targets[0].len() + self.targets[1].len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairLoss<T> {
    /// Summed negative log-likelihood over both targets.
    pub nll: T,
    /// Classifier cross-entropy; zero when the variant has no classifier.
    pub class_ce: T,
    pub tokens: usize,
    /// Reference tokens whose probability hit the floor.
    pub clamped: usize,
}

impl<T: Scalar> PairLoss<T> {
    pub fn total(&self) -> T {
        self.nll + self.class_ce
    }
}

/// `-sum log p(t_i)` over per-position distributions, with the probability floored.
/// Returns the loss and how many positions were clamped.
pub fn sequence_nll<T: Scalar>(dists: &[Array1<T>], targets: &[usize]) -> (T, usize) {
    let floor = T::of(PROB_FLOOR);
    let mut loss = T::zero();
    let mut clamped = 0;
    for (d, &t) in dists.iter().zip(targets) {
        let p = d.get(t).copied().unwrap_or(T::zero());
        if p < floor {
            clamped += 1;
        }
        loss = loss - p.max(floor).ln();
    }
    (loss, clamped)
}

fn add_outer<T: Scalar>(mut m: ArrayViewMut2<'_, T>, a: &Array1<T>, b: ArrayView1<'_, T>) {
    for (i, mut row) in m.outer_iter_mut().enumerate() {
        row.scaled_add(a[i], &b);
    }
}

fn add_vec<T: Scalar>(g: &mut ParamSet<T>, id: usize, a: &Array1<T>) {
    let mut v = g.vec_mut(id);
    v += a;
}

fn one_minus_sq<T: Scalar>(x: &Array1<T>) -> Array1<T> {
    x.mapv(|v| T::one() - v * v)
}

/// Backward through one GRU step. Returns gradients for the input and the previous state.
fn gru_back<T: Scalar>(p: &ParamSet<T>, g: &GruIds, c: &GruCache<T>, dh_new: &Array1<T>, gr: &mut ParamSet<T>) -> (Array1<T>, Array1<T>) {
    let one = T::one();
    let dn = dh_new * &c.z.mapv(|z| one - z);
    let dz = dh_new * &(&c.h - &c.n);
    let mut dh = dh_new * &c.z;
    let dan = dn * &one_minus_sq(&c.n);
    let daz = dz * &c.z.mapv(|z| z * (one - z));

    add_outer(gr.mat_mut(g.w_n), &dan, c.x.view());
    add_outer(gr.mat_mut(g.u_n), &dan, c.rh.view());
    add_vec(gr, g.b_n, &dan);
    let mut dx = p.mat(g.w_n).t().dot(&dan);
    let drh = p.mat(g.u_n).t().dot(&dan);
    let dr = &drh * &c.h;
    dh += &(&drh * &c.r);
    let dar = dr * &c.r.mapv(|r| r * (one - r));

    for (w, u, b, d) in [(g.w_z, g.u_z, g.b_z, &daz), (g.w_r, g.u_r, g.b_r, &dar)] {
        add_outer(gr.mat_mut(w), d, c.x.view());
        add_outer(gr.mat_mut(u), d, c.h.view());
        add_vec(gr, b, d);
        dx += &p.mat(w).t().dot(d);
        dh += &p.mat(u).t().dot(d);
    }
    (dx, dh)
}

/// Loss of one pair without dropout.
pub fn pair_loss<T: Scalar>(m: &Model<T>, pair: &EncodedPair) -> Result<PairLoss<T>, ModelError> {
    run(m, pair, None, None)
}

/// Loss and parameter gradient of one pair. Dropout is applied when `rng` is given.
pub fn loss_and_grad<T: Scalar>(m: &Model<T>, pair: &EncodedPair, rng: Option<&mut ChaCha8Rng>) -> Result<(PairLoss<T>, ParamSet<T>), ModelError> {
    let mut g = m.params.zeros_like();
    let l = run(m, pair, rng, Some(&mut g))?;
    Ok((l, g))
}

struct Step<T> {
    cache: crate::model::StepCache<T>,
    target: usize,
    p: T,
    clamped: bool,
}

fn run<T: Scalar>(
    m: &Model<T>,
    pair: &EncodedPair,
    mut rng: Option<&mut ChaCha8Rng>,
    grads: Option<&mut ParamSet<T>>,
) -> Result<PairLoss<T>, ModelError> {
    let p = &m.params;
    let ids = &m.ids;
    let h = m.hidden();
    let v = m.config.vocab_size;
    let variant = m.config.variant;
    let floor = T::of(PROB_FLOOR);
    let one = T::one();
    if pair.src.ids.is_empty() || pair.src.ids.len() > m.config.max_len {
        return Err(ModelError::Length { len: pair.src.ids.len(), max: m.config.max_len });
    }
    if let Some(&bad) = pair.src.ids.iter().find(|&&i| i >= v) {
        return Err(ModelError::TokenId(bad));
    }

    let (enc, ecache) = m.encode_cached(&pair.src.ids, rng.as_deref_mut());
    let c = condition_vector::<T>(pair.condition)?;
    let cls = condition_index(pair.condition)?;
    let hstar = m.h_star(&enc.h, c);
    let mut loss = PairLoss { nll: T::zero(), class_ce: T::zero(), tokens: 0, clamped: 0 };

    let cls_probs = variant.uses_condition().then(|| m.classify(&enc.h));
    if let Some(pr) = &cls_probs {
        loss.class_ce = -pr[cls].max(floor).ln();
    }

    let mut seqs: Vec<(Array1<T>, Vec<Step<T>>)> = Vec::with_capacity(2);
    for (i, targets) in pair.targets.iter().enumerate() {
        let hq = (p.mat(ids.q_w[i]).dot(&hstar) + p.vec(ids.q_b[i])).mapv(T::tanh);
        let mut cur = hq.clone();
        let mut prev = SOS_ID;
        let mut steps = Vec::with_capacity(targets.len());
        for &y in targets {
            let y = if !variant.uses_copy() && y >= v { UNK_ID } else { y };
            let (hn, sc) = m.step_cached(prev, cur, &enc.states, rng.as_deref_mut());
            let mut py = if y < v { (one - sc.pc) * sc.pv[y] } else { T::zero() };
            if let (Some(a), true) = (&sc.att, variant.uses_copy()) {
                for (j, &e) in pair.src.ext.iter().enumerate() {
                    if e == y {
                        py = py + sc.pc * a.weights[j];
                    }
                }
            }
            let clamped = py < floor;
            loss.nll = loss.nll - py.max(floor).ln();
            loss.tokens += 1;
            loss.clamped += usize::from(clamped);
            steps.push(Step { cache: sc, target: y, p: py, clamped });
            prev = y;
            cur = hn;
        }
        seqs.push((hq, steps));
    }

    let Some(g) = grads else { return Ok(loss) };
    let n = pair.src.ids.len();
    let mut dh_enc: Array1<T> = Array1::zeros(h);
    let mut ds: Vec<Array1<T>> = vec![Array1::zeros(h); n];

    if let Some(pr) = &cls_probs {
        let mut dl = pr.clone();
        dl[cls] = dl[cls] - one;
        add_outer(g.mat_mut(ids.cls_w), &dl, enc.h.view());
        add_vec(g, ids.cls_b, &dl);
        dh_enc += &p.mat(ids.cls_w).t().dot(&dl);
    }

    for (i, (hq, steps)) in seqs.iter().enumerate() {
        let mut dh_next: Array1<T> = Array1::zeros(h);
        for st in steps.iter().rev() {
            let sc = &st.cache;
            let mut dh_t = dh_next.clone();
            let mut dw: Array1<T> = Array1::zeros(sc.w.len());
            if !st.clamped {
                let dpy = -one / st.p;
                let y = st.target;
                let out_in = sc.att.as_ref().map_or(&sc.h, |a| &a.state);
                let mut dout: Array1<T> = Array1::zeros(h);
                if y < v {
                    let gv = dpy * (one - sc.pc) * sc.pv[y];
                    let mut dl = sc.pv.mapv(|q| -q * gv);
                    dl[y] = dl[y] + gv;
                    add_outer(g.mat_mut(ids.out_w), &dl, out_in.view());
                    add_vec(g, ids.out_b, &dl);
                    dout = p.mat(ids.out_w).t().dot(&dl);
                }
                if let Some(a) = &sc.att {
                    let mut da: Array1<T> = Array1::zeros(n);
                    let mut dctx: Array1<T> = Array1::zeros(h);
                    if variant.uses_copy() {
                        let mut mass = T::zero();
                        for (j, &e) in pair.src.ext.iter().enumerate() {
                            if e == y {
                                mass = mass + a.weights[j];
                                da[j] = da[j] + dpy * sc.pc;
                            }
                        }
                        let pv_y = if y < v { sc.pv[y] } else { T::zero() };
                        let dsig = dpy * (mass - pv_y) * sc.pc * (one - sc.pc);
                        add_vec(g, ids.vc[0], &(&sc.h * dsig));
                        add_vec(g, ids.vc[1], &(&a.context * dsig));
                        add_vec(g, ids.vc[2], &(&sc.w * dsig));
                        dh_t.scaled_add(dsig, &p.vec(ids.vc[0]));
                        dctx.scaled_add(dsig, &p.vec(ids.vc[1]));
                        dw.scaled_add(dsig, &p.vec(ids.vc[2]));
                    }
                    let dpre = dout * &one_minus_sq(&a.state);
                    let cat = crate::model::concat(a.context.view(), sc.h.view());
                    add_outer(g.mat_mut(ids.attn), &dpre, cat.view());
                    let dcat = p.mat(ids.attn).t().dot(&dpre);
                    dctx += &dcat.slice(s![..h]);
                    dh_t += &dcat.slice(s![h..]);
                    for j in 0..n {
                        da[j] = da[j] + dctx.dot(&enc.states[j]);
                        ds[j].scaled_add(a.weights[j], &dctx);
                    }
                    let sum: T = a.weights.iter().zip(da.iter()).map(|(&w, &d)| w * d).sum();
                    for j in 0..n {
                        let de = a.weights[j] * (da[j] - sum);
                        dh_t.scaled_add(de, &enc.states[j]);
                        ds[j].scaled_add(de, &sc.h);
                    }
                } else {
                    dh_t += &dout;
                }
            }
            let (dx, dprev) = gru_back(p, &ids.dec, &sc.gru, &dh_t, g);
            dw += &dx;
            if let Some(mk) = &sc.mask {
                dw = dw * mk;
            }
            {
                let mut e = g.mat_mut(ids.emb);
                let mut row = e.row_mut(sc.prev);
                row += &dw;
            }
            dh_next = dprev;
        }
        let dpre = dh_next * &one_minus_sq(hq);
        add_outer(g.mat_mut(ids.q_w[i]), &dpre, hstar.view());
        add_vec(g, ids.q_b[i], &dpre);
        dh_enc += &p.mat(ids.q_w[i]).t().dot(&dpre).slice(s![..h]);
    }

    // projection
    let wp = p.mat(ids.proj_w);
    add_outer(g.mat_mut(ids.proj_w), &dh_enc, ecache.summary_in.view());
    add_vec(g, ids.proj_b, &dh_enc);
    let du = wp.t().dot(&dh_enc);
    let mut d_out: Vec<Array1<T>> = Vec::with_capacity(n);
    for j in 0..n {
        add_outer(g.mat_mut(ids.proj_w), &ds[j], ecache.outputs[j].view());
        add_vec(g, ids.proj_b, &ds[j]);
        d_out.push(wp.t().dot(&ds[j]));
    }

    let last = ecache.layers.len() - 1;
    for l in (0..=last).rev() {
        let lc = &ecache.layers[l];
        let cells = &ids.enc[l];
        let mut dfh: Vec<Array1<T>> = d_out.iter().map(|d| d.slice(s![..h]).to_owned()).collect();
        let mut dbh: Vec<Array1<T>> = d_out.iter().map(|d| d.slice(s![h..]).to_owned()).collect();
        if l == last {
            dfh[n - 1] += &du.slice(s![..h]);
            dbh[0] += &du.slice(s![h..]);
        }
        let in_dim = lc.fw[0].x.len();
        let mut dx: Vec<Array1<T>> = vec![Array1::zeros(in_dim); n];
        let mut carry: Array1<T> = Array1::zeros(h);
        for j in (0..n).rev() {
            let d = &dfh[j] + &carry;
            let (dxi, dp) = gru_back(p, &cells[0], &lc.fw[j], &d, g);
            dx[j] += &dxi;
            carry = dp;
        }
        let mut carry: Array1<T> = Array1::zeros(h);
        for j in 0..n {
            let d = &dbh[j] + &carry;
            let (dxi, dp) = gru_back(p, &cells[1], &lc.bw[j], &d, g);
            dx[j] += &dxi;
            carry = dp;
        }
        for (d, mk) in dx.iter_mut().zip(&lc.masks) {
            if let Some(mk) = mk {
                *d = &*d * mk;
            }
        }
        if l > 0 {
            d_out = dx;
        } else {
            let mut e = g.mat_mut(ids.emb);
            for (j, d) in dx.iter().enumerate() {
                let mut row = e.row_mut(ecache.ids[j]);
                row += d;
            }
        }
    }
    Ok(loss)
}
