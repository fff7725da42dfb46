//! Flat parameter storage with named matrix slots. Gradients use the same layout.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub type SlotId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet<T> {
    pub slots: Vec<Slot>,
    pub values: Vec<T>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        ParamSet { slots: Vec::new(), values: Vec::new() }
    }
}

impl<T: Scalar> ParamSet<T> {
    /// Appends a zero-filled `rows x cols` slot. Vectors are `rows x 1`.
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> SlotId {
        let offset = self.values.len();
        self.slots.push(Slot { name: name.into(), rows, cols, offset });
        self.values.resize(offset + rows * cols, T::zero());
        self.slots.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<SlotId> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn zeros_like(&self) -> ParamSet<T> {
        ParamSet { slots: self.slots.clone(), values: vec![T::zero(); self.values.len()] }
    }

    pub fn group(&self, id: SlotId) -> &[T] {
        let s = &self.slots[id];
        &self.values[s.offset..s.offset + s.len()]
    }

    pub fn group_mut(&mut self, id: SlotId) -> &mut [T] {
        let s = &self.slots[id];
        let (a, b) = (s.offset, s.offset + s.len());
        &mut self.values[a..b]
    }

    pub fn mat(&self, id: SlotId) -> ArrayView2<'_, T> {
        let s = &self.slots[id];
        ArrayView2::from_shape((s.rows, s.cols), self.group(id)).expect("slot shape")
    }

    pub fn mat_mut(&mut self, id: SlotId) -> ArrayViewMut2<'_, T> {
        let (r, c) = (self.slots[id].rows, self.slots[id].cols);
        ArrayViewMut2::from_shape((r, c), self.group_mut(id)).expect("slot shape")
    }

    pub fn vec(&self, id: SlotId) -> ArrayView1<'_, T> {
        ArrayView1::from(self.group(id))
    }

    pub fn vec_mut(&mut self, id: SlotId) -> ArrayViewMut1<'_, T> {
        ArrayViewMut1::from(self.group_mut(id))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn scale(&mut self, k: T) {
        for v in &mut self.values {
            *v = *v * k;
        }
    }

    pub fn add_assign(&mut self, o: &ParamSet<T>) {
        debug_assert_eq!(self.slots, o.slots);
        for (a, &b) in self.values.iter_mut().zip(&o.values) {
            *a = *a + b;
        }
    }
}

/// Adam with bias correction. With `amsgrad` the second-moment estimate never decreases.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub amsgrad: bool,
    m: Vec<T>,
    v: Vec<T>,
    vmax: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, n: usize) -> Adam<T> {
        Adam {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            amsgrad: false,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            vmax: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, p: &mut ParamSet<T>, g: &ParamSet<T>) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..p.values.len() {
            let gi = g.values[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * gi;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * gi * gi;
            let mh = self.m[i] / c1;
            let mut vh = self.v[i] / c2;
            if self.amsgrad {
                self.vmax[i] = self.vmax[i].max(vh);
                vh = self.vmax[i];
            }
            p.values[i] = p.values[i] - self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
