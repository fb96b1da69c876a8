use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Named trainable tensors plus the fingerprint of the architecture they belong to.
pub struct ParamSet {
    fingerprint: String,
    vars: BTreeMap<String, Var>,
}

impl std::fmt::Debug for ParamSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamSet")
            .field("fingerprint", &self.fingerprint)
            .field("tensors", &self.vars.len())
            .field("params", &self.num_params())
            .finish()
    }
}

/// SHA-256 hex of an architecture descriptor.
pub fn fingerprint(descriptor: &str) -> String {
    hex::encode(Sha256::digest(descriptor.as_bytes()))
}

impl ParamSet {
    pub fn from_tensors(fingerprint: String, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        let vars = tensors
            .into_iter()
            .map(|(k, t)| Ok((k, Var::from_tensor(&t.copy()?)?)))
            .collect::<Result<_>>()?;
        Ok(Self { fingerprint, vars })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.vars.get(name).map(Var::as_tensor).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn num_tensors(&self) -> usize {
        self.vars.len()
    }

    pub fn num_params(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    pub fn dtype(&self) -> DType {
        self.vars.values().next().map(|v| v.dtype()).unwrap_or(DType::F32)
    }

    /// Copy with independent storage; updates to one never show in the other.
    pub fn deep_clone(&self) -> Result<Self> {
        self.to_dtype(self.dtype())
    }

    pub fn to_dtype(&self, dtype: DType) -> Result<Self> {
        let tensors = self
            .vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().to_dtype(dtype)?)))
            .collect::<Result<_>>()?;
        Self::from_tensors(self.fingerprint.clone(), tensors)
    }

    /// Snapshot of the current values.
    pub fn tensors(&self) -> Result<BTreeMap<String, Tensor>> {
        self.vars.iter().map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?))).collect()
    }

    pub fn all_finite(&self) -> Result<bool> {
        for v in self.vars.values() {
            let s = v.as_tensor().abs()?.sum_all()?.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !s.is_finite() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Bitwise equality of names, shapes and values.
    pub fn bit_equal(&self, other: &ParamSet) -> Result<bool> {
        if self.fingerprint != other.fingerprint || self.vars.len() != other.vars.len() {
            return Ok(false);
        }
        for ((ka, va), (kb, vb)) in self.vars.iter().zip(other.vars.iter()) {
            if ka != kb || va.dims() != vb.dims() || va.dtype() != vb.dtype() {
                return Ok(false);
            }
            let a: Vec<f64> = va.as_tensor().flatten_all()?.to_dtype(DType::F64)?.to_vec1()?;
            let b: Vec<f64> = vb.as_tensor().flatten_all()?.to_dtype(DType::F64)?.to_vec1()?;
            if a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Draws parameters in registration order from one seeded stream.
pub struct ParamBuilder {
    rng: ChaCha8Rng,
    dtype: DType,
    device: Device,
    tensors: BTreeMap<String, Tensor>,
}

impl ParamBuilder {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dtype,
            device: Device::Cpu,
            tensors: BTreeMap::new(),
        }
    }

    fn normal(&mut self, n: usize, std: f64) -> Vec<f64> {
        (0..n).map(|_| std * Distribution::<f64>::sample(&StandardNormal, &mut self.rng)).collect::<Vec<f64>>()
    }

    fn insert(&mut self, name: String, data: Vec<f64>, shape: &[usize]) -> Result<()> {
        let t = Tensor::from_vec(data, shape, &self.device)?.to_dtype(self.dtype)?;
        if self.tensors.insert(name.clone(), t).is_some() {
            return Err(Error::BadConfig(format!("parameter {name} registered twice")));
        }
        Ok(())
    }

    /// Registers `{name}.w` (`out x in x k x k`, std `gain / sqrt(fan_in)`) and a zero `{name}.b`.
    pub fn conv(&mut self, name: &str, out_c: usize, in_c: usize, k: usize, gain: f64) -> Result<()> {
        let fan_in = (in_c * k * k) as f64;
        let w = self.normal(out_c * in_c * k * k, gain / fan_in.sqrt());
        self.insert(format!("{name}.w"), w, &[out_c, in_c, k, k])?;
        self.insert(format!("{name}.b"), vec![0.0; out_c], &[out_c])
    }

    pub fn finish(self, fingerprint: String) -> Result<ParamSet> {
        ParamSet::from_tensors(fingerprint, self.tensors)
    }
}
