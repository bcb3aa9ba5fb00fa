use std::collections::BTreeMap;

use rand::Rng;

use crate::{AdError, Array, Result};

#[derive(Clone, Debug, PartialEq)]
struct Slot {
    value: Array,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Named parameters with gradient buffers and Adam moments. Names are
/// dot-separated paths such as `encoder.layer0.wq`; iteration is in name
/// order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    slots: BTreeMap<String, Slot>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Array) -> Result<()> {
        if self.slots.contains_key(name) {
            return Err(AdError::Invalid {
                op: "param_store",
                msg: format!("duplicate parameter `{name}`"),
            });
        }
        let len = value.len();
        self.slots.insert(
            name.to_string(),
            Slot {
                value,
                grad: vec![0.0; len],
                m: vec![0.0; len],
                v: vec![0.0; len],
            },
        );
        Ok(())
    }

    /// Inserts a parameter drawn from `uniform(-bound, bound)`.
    pub fn insert_uniform<R: Rng>(&mut self, name: &str, shape: &[usize], bound: f64, rng: &mut R) -> Result<()> {
        self.insert(name, Array::uniform(shape, bound, rng))
    }

    pub fn value(&self, name: &str) -> Option<&Array> {
        self.slots.get(name).map(|s| &s.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.slots.get_mut(name).map(|s| &mut s.value)
    }

    pub fn grad(&self, name: &str) -> Option<Array> {
        self.slots
            .get(name)
            .map(|s| Array::new(s.value.shape().to_vec(), s.grad.clone()).expect("grad shape"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn accumulate_grad(&mut self, name: &str, g: &[f64], scale: f64) -> Result<()> {
        let slot = self
            .slots
            .get_mut(name)
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))?;
        if slot.grad.len() != g.len() {
            return Err(AdError::Invalid {
                op: "accumulate_grad",
                msg: format!("gradient for `{name}` has {} values, expected {}", g.len(), slot.grad.len()),
            });
        }
        for (a, b) in slot.grad.iter_mut().zip(g) {
            *a += scale * b;
        }
        Ok(())
    }

    /// Adds `other`'s gradient buffers into this store's.
    pub fn merge_grads(&mut self, other: &ParamStore) -> Result<()> {
        for (name, slot) in &other.slots {
            self.accumulate_grad(name, &slot.grad, 1.0)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for s in self.slots.values_mut() {
            s.grad.fill(0.0);
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.slots.values().all(|s| s.grad.iter().all(|g| g.is_finite()))
    }

    pub fn values_finite(&self) -> bool {
        self.slots.values().all(|s| s.value.all_finite())
    }

    /// One bias-corrected Adam update from the accumulated gradients, which
    /// are cleared afterwards.
    pub fn adam_step(&mut self, lr: f64, cfg: AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for s in self.slots.values_mut() {
            let value = s.value.data_mut();
            for i in 0..value.len() {
                let g = s.grad[i];
                s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
                s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
                let mhat = s.m[i] / bc1;
                let vhat = s.v[i] / bc2;
                value[i] -= lr * mhat / (vhat.sqrt() + cfg.eps);
            }
            s.grad.fill(0.0);
        }
    }

    /// Copy of the values only: fresh gradient buffers and moments.
    pub fn snapshot(&self) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, s) in &self.slots {
            out.insert(name, s.value.clone()).expect("names unique");
        }
        out
    }

    /// `(name, array)` pairs for the checkpoint container: values, then Adam
    /// moments under `adam.m.` / `adam.v.`, then `adam.step`. Every name is
    /// prefixed with `prefix`.
    pub fn to_named_arrays(&self, prefix: &str) -> Vec<(String, Array)> {
        let mut out: Vec<(String, Array)> = self
            .slots
            .iter()
            .map(|(n, s)| (format!("{prefix}{n}"), s.value.clone()))
            .collect();
        for (n, s) in &self.slots {
            let shape = s.value.shape().to_vec();
            out.push((
                format!("{prefix}adam.m.{n}"),
                Array::new(shape.clone(), s.m.clone()).expect("shape"),
            ));
            out.push((
                format!("{prefix}adam.v.{n}"),
                Array::new(shape, s.v.clone()).expect("shape"),
            ));
        }
        out.push((format!("{prefix}adam.step"), Array::scalar(self.step as f64)));
        out
    }

    /// Inverse of [`ParamStore::to_named_arrays`]: reads every entry whose
    /// name starts with `prefix`, skipping the rest.
    pub fn from_named_arrays(arrays: &[(String, Array)], prefix: &str) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        let mut moments: Vec<(&str, bool, &Array)> = Vec::new();
        for (name, arr) in arrays {
            let Some(name) = name.strip_prefix(prefix) else { continue };
            if let Some(rest) = name.strip_prefix("adam.m.") {
                moments.push((rest, true, arr));
            } else if let Some(rest) = name.strip_prefix("adam.v.") {
                moments.push((rest, false, arr));
            } else if name == "adam.step" {
                store.step = arr.item() as u64;
            } else {
                store.insert(name, arr.clone())?;
            }
        }
        for (name, is_m, arr) in moments {
            let slot = store.slots.get_mut(name).ok_or_else(|| {
                AdError::Checkpoint(format!("moment for unknown parameter `{name}`"))
            })?;
            if arr.len() != slot.value.len() {
                return Err(AdError::Checkpoint(format!("moment shape mismatch for `{name}`")));
            }
            if is_m {
                slot.m = arr.data().to_vec();
            } else {
                slot.v = arr.data().to_vec();
            }
        }
        Ok(store)
    }
}
