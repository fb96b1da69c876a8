use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamHyper};
use super::early_stop::EarlyStopping;
use super::record::EpochMetrics;
use crate::common::RunConfig;
use crate::nn::ParamSet;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"RSTRTENS";

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug)]
pub struct TrainState {
    /// Last completed epoch.
    pub epoch: usize,
    pub seed: u64,
    pub params: BTreeMap<String, ParamSet>,
    pub optim: BTreeMap<String, Adam>,
    pub stopper: EarlyStopping,
    pub history: Vec<EpochMetrics>,
    /// Additional tensors such as replay-buffer contents.
    pub extra: BTreeMap<String, Tensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub kind: String,
    pub seed: u64,
    pub next_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct OptimMeta {
    hyper: AdamHyper,
    step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub fingerprints: BTreeMap<String, String>,
    pub config: RunConfig,
    pub epoch: usize,
    pub rng: RngState,
    pub stopper: EarlyStopping,
    optim: BTreeMap<String, OptimMeta>,
    pub history: Vec<EpochMetrics>,
}

fn dtype_tag(d: DType) -> Result<u8> {
    Ok(match d {
        DType::F32 => 0,
        DType::F64 => 1,
        other => return Err(Error::BadConfig(format!("cannot archive dtype {other:?}"))),
    })
}

/// Little-endian tensor archive; entries are written in name order.
pub fn write_archive(path: &Path, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(dtype_tag(t.dtype())?);
        buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.dims() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        let flat = t.flatten_all()?;
        match t.dtype() {
            DType::F32 => flat.to_vec1::<f32>()?.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            _ => flat.to_vec1::<f64>()?.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        }
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::WriteError { path: path.to_path_buf(), reason: e.to_string() })?;
    f.write_all(&buf).map_err(|e| Error::WriteError { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::DecodeError { path: self.path.to_path_buf(), reason: "truncated archive".into() });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_archive(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0, path };
    if c.take(8)? != MAGIC {
        return Err(Error::DecodeError { path: path.to_path_buf(), reason: "not a tensor archive".into() });
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let count = c.u64()? as usize;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::DecodeError { path: path.to_path_buf(), reason: "bad tensor name".into() })?;
        let tag = c.take(1)?[0];
        let rank = c.u32()? as usize;
        let dims: Vec<usize> = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<_>>()?;
        let n: usize = dims.iter().product();
        let t = match tag {
            0 => {
                let v: Vec<f32> =
                    c.take(4 * n)?.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4"))).collect();
                Tensor::from_vec(v, dims, &Device::Cpu)?
            }
            1 => {
                let v: Vec<f64> =
                    c.take(8 * n)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8"))).collect();
                Tensor::from_vec(v, dims, &Device::Cpu)?
            }
            t => return Err(Error::DecodeError { path: path.to_path_buf(), reason: format!("unknown dtype tag {t}") }),
        };
        out.insert(name, t);
    }
    Ok(out)
}

pub fn archive_path(stem: &Path) -> PathBuf {
    stem.with_extension("bin")
}

pub fn sidecar_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

/// Writes `<stem>.bin` (tensors) and `<stem>.json` (metadata).
pub fn save_checkpoint(stem: &Path, state: &TrainState, config: &RunConfig) -> Result<PathBuf> {
    if let Some(dir) = stem.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut tensors = BTreeMap::new();
    for (set, p) in &state.params {
        for (k, t) in p.tensors()? {
            tensors.insert(format!("params/{set}/{k}"), t);
        }
    }
    for (set, a) in &state.optim {
        for (k, t) in a.state_tensors() {
            tensors.insert(format!("optim/{set}/{k}"), t);
        }
    }
    for (k, t) in &state.extra {
        tensors.insert(format!("extra/{k}"), t.clone());
    }
    write_archive(&archive_path(stem), &tensors)?;
    let sidecar = Sidecar {
        format_version: CHECKPOINT_VERSION,
        fingerprints: state.params.iter().map(|(k, p)| (k.clone(), p.fingerprint().to_string())).collect(),
        config: config.clone(),
        epoch: state.epoch,
        rng: RngState { kind: "chacha8-per-epoch".into(), seed: state.seed, next_epoch: state.epoch + 1 },
        stopper: state.stopper.clone(),
        optim: state.optim.iter().map(|(k, a)| (k.clone(), OptimMeta { hyper: a.hyper, step: a.step })).collect(),
        history: state.history.clone(),
    };
    let path = sidecar_path(stem);
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .map_err(|e| Error::WriteError { path: path.clone(), reason: e.to_string() })?;
    Ok(archive_path(stem))
}

pub fn read_sidecar(stem: &Path) -> Result<Sidecar> {
    let path = sidecar_path(stem);
    if !path.exists() {
        return Err(Error::FileMissing(path));
    }
    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let text = std::fs::read_to_string(&path)?;
    let v: Version = serde_json::from_str(&text)?;
    if v.format_version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: v.format_version, expected: CHECKPOINT_VERSION });
    }
    Ok(serde_json::from_str(&text)?)
}

/// Loads a checkpoint, checking each parameter set against the expected
/// architecture fingerprints.
pub fn load_checkpoint(stem: &Path, expected: &BTreeMap<String, String>) -> Result<(TrainState, RunConfig)> {
    let sidecar = read_sidecar(stem)?;
    for (set, fp) in expected {
        let found = sidecar.fingerprints.get(set).cloned().unwrap_or_default();
        if &found != fp {
            return Err(Error::FingerprintMismatch { found, expected: fp.clone() });
        }
    }
    let mut tensors = read_archive(&archive_path(stem))?;
    let mut take_prefix = |prefix: &str| -> BTreeMap<String, Tensor> {
        let keys: Vec<String> = tensors.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        keys.into_iter().map(|k| {
            let t = tensors.remove(&k).expect("listed key");
            (k[prefix.len()..].to_string(), t)
        }).collect()
    };
    let mut params = BTreeMap::new();
    for (set, fp) in &sidecar.fingerprints {
        params.insert(set.clone(), ParamSet::from_tensors(fp.clone(), take_prefix(&format!("params/{set}/")))?);
    }
    let mut optim = BTreeMap::new();
    for (set, meta) in &sidecar.optim {
        optim.insert(set.clone(), Adam::from_state(meta.hyper, meta.step, take_prefix(&format!("optim/{set}/"))));
    }
    let extra = take_prefix("extra/");
    let state = TrainState {
        epoch: sidecar.epoch,
        seed: sidecar.rng.seed,
        params,
        optim,
        stopper: sidecar.stopper,
        history: sidecar.history,
        extra,
    };
    Ok((state, sidecar.config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archive_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = BTreeMap::new();
        t.insert("b".to_string(), Tensor::new(&[[1.5f32, -0.0], [f32::MIN_POSITIVE, 3.0]], &Device::Cpu).unwrap());
        t.insert("a".to_string(), Tensor::new(&[0.1f64, 1e-300], &Device::Cpu).unwrap());
        let p = dir.path().join("x.bin");
        write_archive(&p, &t).unwrap();
        let back = read_archive(&p).unwrap();
        let p2 = dir.path().join("y.bin");
        write_archive(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(back["b"].dims(), &[2, 2]);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[8] = 9;
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_archive(&p), Err(Error::VersionMismatch { found: 9, expected: 1 })));
    }
}
