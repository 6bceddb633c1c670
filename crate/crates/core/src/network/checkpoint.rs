//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SUIMCKPT"  u32 version  u32 len  spec JSON
//! u32 count   count x record
//! u8 has_optimizer  [u64 step  f64 lr beta1 beta2 eps  u32 count  count x m-record  count x v-record]
//!
//! record = u32 name_len  name  u8 dtype  u8 ndim  ndim x u64 dim  payload
//! ```
//!
//! `dtype` is 0 for f32 and 1 for f64.

use std::fs;
use std::path::Path;

use super::model::Network;
use super::spec::NetworkSpec;
use crate::engine::{Adam, AdamConfig, Layer, Real, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SUIMCKPT";
pub const VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

struct Record {
    name: String,
    dims: Vec<usize>,
    values: Vec<f64>,
}

fn put_record<T: Real>(out: &mut Vec<u8>, name: &str, dims: &[usize], values: &[T]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(T::DTYPE);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    T::to_le_bytes_vec(values, out);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            corrupt(format!("truncated: wanted {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn record(&mut self) -> Result<Record> {
        let len = self.u32()? as usize;
        let name = String::from_utf8(self.take(len)?.to_vec()).map_err(|_| corrupt("record name is not UTF-8"))?;
        let dtype = self.u8()?;
        let ndim = self.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(usize::try_from(self.u64()?).map_err(|_| corrupt("dimension overflow"))?);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| corrupt(format!("{name}: dimension overflow")))?;
        let values = match dtype {
            0 => f32::from_le_bytes_slice(self.take(count.checked_mul(4).ok_or_else(|| corrupt("size overflow"))?)?)
                .into_iter()
                .map(f64::from)
                .collect(),
            1 => f64::from_le_bytes_slice(self.take(count.checked_mul(8).ok_or_else(|| corrupt("size overflow"))?)?),
            t => return Err(corrupt(format!("{name}: unknown dtype tag {t}"))),
        };
        Ok(Record { name, dims, values })
    }
}

pub fn encode_checkpoint<T: Real>(net: &Network<T>, adam: Option<&Adam<T>>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let spec = serde_json::to_string(net.spec())?;
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(spec.as_bytes());
    let tensors = net.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        put_record(&mut out, name, &t.shape().dims(), t.data());
    }
    match adam {
        None => out.push(0),
        Some(a) => {
            out.push(1);
            out.extend_from_slice(&a.step.to_le_bytes());
            for v in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(a.m.len() as u32).to_le_bytes());
            for (i, m) in a.m.iter().enumerate() {
                put_record(&mut out, &format!("adam.m.{i}"), &[m.len()], m);
            }
            for (i, v) in a.v.iter().enumerate() {
                put_record(&mut out, &format!("adam.v.{i}"), &[v.len()], v);
            }
        }
    }
    Ok(out)
}

pub fn save_checkpoint<T: Real>(net: &Network<T>, adam: Option<&Adam<T>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_checkpoint(net, adam)?).map_err(|e| Error::io(path, e))
}

/// Parsed checkpoint contents, values widened to f64.
pub struct CheckpointData {
    pub spec: NetworkSpec,
    records: Vec<Record>,
    optimizer: Option<(u64, AdamConfig, Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CheckpointData> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| corrupt("file too short for header"))? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version} (expected {VERSION})")));
    }
    let len = r.u32()? as usize;
    let spec: NetworkSpec =
        serde_json::from_slice(r.take(len)?).map_err(|e| corrupt(format!("spec: {e}")))?;
    spec.validate().map_err(|e| corrupt(format!("spec: {e}")))?;
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        records.push(r.record()?);
    }
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let config = AdamConfig {
                lr: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            let n = r.u32()? as usize;
            let mut m = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                m.push(r.record()?.values);
            }
            let mut v = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                v.push(r.record()?.values);
            }
            Some((step, config, m, v))
        }
        f => return Err(corrupt(format!("bad optimizer flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(CheckpointData {
        spec,
        records,
        optimizer,
    })
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<CheckpointData> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

impl CheckpointData {
    /// Copy the stored values into `net`, which must have exactly the same
    /// tensor names and shapes.
    pub fn apply<T: Real>(&self, net: &mut Network<T>) -> Result<Option<Adam<T>>> {
        let mut targets = net.named_tensors_mut();
        if targets.len() != self.records.len() {
            return Err(corrupt(format!(
                "shape mismatch: checkpoint has {} tensors, network has {}",
                self.records.len(),
                targets.len()
            )));
        }
        for ((name, t), rec) in targets.iter_mut().zip(&self.records) {
            if *name != rec.name || t.shape().dims().as_slice() != rec.dims.as_slice() {
                return Err(corrupt(format!(
                    "shape mismatch: network tensor {name} {} vs checkpoint {} {:?}",
                    t.shape(),
                    rec.name,
                    rec.dims
                )));
            }
            for (d, &v) in t.data_mut().iter_mut().zip(&rec.values) {
                *d = T::from_f64_lossy(v);
            }
        }
        let sizes: Vec<usize> = net.params_mut().iter().map(|p| p.len()).collect();
        Ok(match &self.optimizer {
            None => None,
            Some((step, config, m, v)) => {
                let conv = |b: &Vec<Vec<f64>>| -> Vec<Vec<T>> {
                    b.iter().map(|x| x.iter().map(|&v| T::from_f64_lossy(v)).collect()).collect()
                };
                let fits = |b: &Vec<Vec<f64>>| b.iter().map(Vec::len).eq(sizes.iter().copied());
                if !m.is_empty() && (!fits(m) || !fits(v)) {
                    return Err(corrupt("shape mismatch: optimizer state does not fit the parameters"));
                }
                Some(Adam {
                    config: *config,
                    step: *step,
                    m: conv(m),
                    v: conv(v),
                })
            }
        })
    }
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<(Network<T>, Option<Adam<T>>)> {
    let data = read_checkpoint(path)?;
    let mut net = Network::build(&data.spec)?;
    let adam = data.apply(&mut net)?;
    Ok((net, adam))
}

/// Load weights into an existing network; fails on any name or shape mismatch.
pub fn load_weights<T: Real>(net: &mut Network<T>, path: impl AsRef<Path>) -> Result<Option<Adam<T>>> {
    read_checkpoint(path)?.apply(net)
}

/// Exact equality of shapes and value bit patterns.
pub fn bit_identical<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> bool {
    // widening f32 to f64 is injective, so comparing f64 bits is exact
    a.shape() == b.shape()
        && a.data().iter().zip(b.data()).all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits())
}
