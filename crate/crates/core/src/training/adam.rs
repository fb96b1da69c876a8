use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::nn::ParamSet;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Adam with bias correction; moment buffers are created lazily per parameter.
#[derive(Debug)]
pub struct Adam {
    pub hyper: AdamHyper,
    pub step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(hyper: AdamHyper) -> Self {
        Self { hyper, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    /// Applies one update to every parameter of `params` that has a gradient.
    pub fn step(&mut self, params: &ParamSet, grads: &GradStore) -> Result<()> {
        self.step += 1;
        let AdamHyper { learning_rate, beta1, beta2, eps } = self.hyper;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
        for (name, var) in params.iter() {
            let Some(g) = grads.get(var.as_tensor()) else { continue };
            // gradients can carry the forward graph; keep it out of the moment buffers
            let g = &g.detach();
            let m = match self.m.get(name) {
                Some(m) => ((m * beta1)? + (g * (1.0 - beta1))?)?,
                None => (g * (1.0 - beta1))?,
            };
            let v = match self.v.get(name) {
                Some(v) => ((v * beta2)? + (g.sqr()? * (1.0 - beta2))?)?,
                None => (g.sqr()? * (1.0 - beta2))?,
            };
            let update = ((&m / c1)? / ((&v / c2)?.sqrt()? + eps)?)?;
            var.set(&(var.as_tensor() - (update * learning_rate)?)?)?;
            self.m.insert(name.clone(), m);
            self.v.insert(name.clone(), v);
        }
        Ok(())
    }

    /// Moment buffers keyed `m/<param>` and `v/<param>`.
    pub fn state_tensors(&self) -> BTreeMap<String, Tensor> {
        let m = self.m.iter().map(|(k, t)| (format!("m/{k}"), t.clone()));
        let v = self.v.iter().map(|(k, t)| (format!("v/{k}"), t.clone()));
        m.chain(v).collect()
    }

    pub fn from_state(hyper: AdamHyper, step: u64, tensors: BTreeMap<String, Tensor>) -> Self {
        let mut a = Self::new(hyper);
        a.step = step;
        for (k, t) in tensors {
            if let Some(name) = k.strip_prefix("m/") {
                a.m.insert(name.to_string(), t);
            } else if let Some(name) = k.strip_prefix("v/") {
                a.v.insert(name.to_string(), t);
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut t = BTreeMap::new();
        t.insert("w".to_string(), Tensor::new(&[1.0f64, -2.0], &Device::Cpu).unwrap());
        let p = ParamSet::from_tensors("x".into(), t).unwrap();
        let loss = (p.get("w").unwrap().sqr().unwrap().sum_all().unwrap() * 0.5).unwrap();
        let grads = loss.backward().unwrap();
        let mut adam = Adam::new(AdamHyper { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-12 });
        adam.step(&p, &grads).unwrap();
        let w: Vec<f64> = p.get("w").unwrap().to_dtype(DType::F64).unwrap().to_vec1().unwrap();
        // bias-corrected first step is lr * sign(g)
        assert!((w[0] - 0.9).abs() < 1e-9 && (w[1] + 1.9).abs() < 1e-9);
        assert_eq!(adam.state_tensors().len(), 2);
    }
}
