use std::collections::{BTreeMap, HashMap};

use crate::nn::ParamStore;
use crate::tensor::Grads;

#[derive(Clone, Debug, Default)]
struct Moments {
    m: Vec<f32>,
    v: Vec<f32>,
    t: u64,
}

/// Adaptive-moment optimizer with bias correction and optional per-prefix
/// learning-rate multipliers.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    lr_mults: Vec<(String, f32)>,
    state: HashMap<String, Moments>,
}

impl Adam {
    pub fn new(lr: f32, beta1: f32, beta2: f32) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            lr_mults: Vec::new(),
            state: HashMap::new(),
        }
    }

    /// Scales the step size of every parameter whose name starts with `prefix`.
    pub fn set_lr_multiplier(&mut self, prefix: impl Into<String>, mult: f32) {
        let prefix = prefix.into();
        self.lr_mults.retain(|(p, _)| *p != prefix);
        self.lr_mults.push((prefix, mult));
    }

    fn lr_for(&self, name: &str) -> f32 {
        self.lr_mults
            .iter()
            .filter(|(p, _)| name.starts_with(p.as_str()))
            .max_by_key(|(p, _)| p.len())
            .map_or(self.lr, |(_, m)| self.lr * m)
    }

    /// Updates every entry of `store` that received a gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        let named: Vec<(String, Vec<f32>)> = store
            .iter()
            .filter_map(|(name, t)| grads.get(t).map(|g| (name.clone(), g.to_vec())))
            .collect();
        self.step_named(store, named);
    }

    /// Updates the named entries with explicitly supplied gradients.
    pub fn step_named(&mut self, store: &mut ParamStore, grads: impl IntoIterator<Item = (String, Vec<f32>)>) {
        for (name, g) in grads {
            let lr = self.lr_for(&name);
            let current = store.get(&name);
            assert_eq!(current.numel(), g.len(), "gradient size mismatch for `{name}`");
            let st = self.state.entry(name.clone()).or_insert_with(|| Moments {
                m: vec![0.0; g.len()],
                v: vec![0.0; g.len()],
                t: 0,
            });
            st.t += 1;
            let bc1 = 1.0 - (self.beta1 as f64).powi(st.t as i32);
            let bc2 = 1.0 - (self.beta2 as f64).powi(st.t as i32);
            let mut data = current.to_vec();
            for i in 0..g.len() {
                st.m[i] = self.beta1 * st.m[i] + (1.0 - self.beta1) * g[i];
                st.v[i] = self.beta2 * st.v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = st.m[i] as f64 / bc1;
                let v_hat = st.v[i] as f64 / bc2;
                data[i] -= (lr as f64 * m_hat / (v_hat.sqrt() + self.eps as f64)) as f32;
            }
            store.set_data(&name, data);
        }
    }

    pub fn reset(&mut self) {
        self.state.clear();
    }

    /// Moment estimates and step counts, keyed by parameter name.
    pub fn export_state(&self) -> (ParamStore, ParamStore, BTreeMap<String, u64>) {
        let mut m = ParamStore::new();
        let mut v = ParamStore::new();
        let mut t = BTreeMap::new();
        for (name, st) in &self.state {
            m.insert(name.clone(), st.m.clone(), &[st.m.len()]);
            v.insert(name.clone(), st.v.clone(), &[st.v.len()]);
            t.insert(name.clone(), st.t);
        }
        (m, v, t)
    }

    /// Inverse of [`Adam::export_state`]. Entries missing from `t` are skipped.
    pub fn import_state(&mut self, m: &ParamStore, v: &ParamStore, t: &BTreeMap<String, u64>) {
        self.state.clear();
        for (name, &steps) in t {
            if let (Some(mt), Some(vt)) = (m.try_get(name), v.try_get(name)) {
                self.state.insert(
                    name.clone(),
                    Moments {
                        m: mt.to_vec(),
                        v: vt.to_vec(),
                        t: steps,
                    },
                );
            }
        }
    }
}
