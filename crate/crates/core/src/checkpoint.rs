//! Little-endian binary checkpoints.
//!
//! Layout: `LAPD`, `u32` version, then length-prefixed UTF-8 blocks for the
//! architecture (TOML), the run configuration (TOML) and its fingerprint, a
//! `u64` epoch, the parameter tensors and an optional Adam state. A tensor is
//! `u32` name length, name bytes, `u32` rank, `u32` dims and `f32` values.

use std::path::Path;

use crate::config::fingerprint;
use crate::error::{Error, Result};
use crate::model::{Architecture, ModelParams};
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LAPD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub adam: Option<AdamState>,
    pub epoch: u64,
    pub config_toml: String,
    pub config_fingerprint: String,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn tensor(&mut self, name: &str, t: &Tensor) {
        self.str(name);
        self.u32(t.rank() as u32);
        for &d in t.shape() {
            self.u32(d as u32);
        }
        for v in t.data() {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "checkpoint truncated: needed {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format(format!("invalid UTF-8 string at offset {at}")))
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let name = self.str()?;
        let rank = self.u32()? as usize;
        let shape = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let count = count
            .filter(|c| c.checked_mul(4).is_some_and(|b| b <= self.bytes.len()))
            .ok_or_else(|| Error::Format(format!("tensor `{name}` has implausible shape {shape:?}")))?;
        let data = self
            .take(count * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("tensor `{name}`: {e}")))?;
        Ok((name, t))
    }
}

impl Checkpoint {
    pub fn new(params: ModelParams, adam: Option<AdamState>, epoch: u64, config_toml: String) -> Self {
        let config_fingerprint = fingerprint(config_toml.as_bytes());
        Checkpoint {
            params,
            adam,
            epoch,
            config_toml,
            config_fingerprint,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.str(&toml::to_string(self.params.arch()).expect("architecture always serializes"));
        w.str(&self.config_toml);
        w.str(&self.config_fingerprint);
        w.u64(self.epoch);
        w.u32(self.params.len() as u32);
        for (name, t) in self.params.tensors() {
            w.tensor(name, t);
        }
        match &self.adam {
            None => w.0.push(0),
            Some(state) => {
                w.0.push(1);
                w.f64(state.config.beta1);
                w.f64(state.config.beta2);
                w.f64(state.config.eps);
                w.u64(state.step_count());
                for (i, (m, v)) in state.first_moments().iter().zip(state.second_moments()).enumerate() {
                    let name = self.params.name(i);
                    w.tensor(&format!("{name}.m"), m);
                    w.tensor(&format!("{name}.v"), v);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4).map_err(|_| Error::Format("file too short for a checkpoint header".into()))?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad checkpoint magic {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(MAGIC)
            )));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}; this build reads version {VERSION}"
            )));
        }
        let arch: Architecture =
            toml::from_str(&r.str()?).map_err(|e| Error::Format(format!("architecture block: {e}")))?;
        let config_toml = r.str()?;
        let config_fingerprint = r.str()?;
        let epoch = r.u64()?;
        let n = r.u32()? as usize;
        let tensors = (0..n).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?;
        let params = ModelParams::from_parts(arch, tensors).map_err(|e| Error::Format(e.to_string()))?;
        let adam = match r.u8()? {
            0 => None,
            1 => {
                let config = AdamConfig {
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                };
                let step = r.u64()?;
                let mut first = Vec::with_capacity(n);
                let mut second = Vec::with_capacity(n);
                for i in 0..n {
                    let (m, v) = (r.tensor()?.1, r.tensor()?.1);
                    if m.shape() != params.get(i).shape() {
                        return Err(Error::Format(format!("moment shape mismatch for `{}`", params.name(i))));
                    }
                    first.push(m);
                    second.push(v);
                }
                Some(AdamState::from_parts(config, step, first, second).map_err(|e| Error::Format(e.to_string()))?)
            }
            flag => return Err(Error::Format(format!("bad optimizer-state flag {flag}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after checkpoint", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            params,
            adam,
            epoch,
            config_toml,
            config_fingerprint,
        })
    }

    /// Short hash of the serialized checkpoint.
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
