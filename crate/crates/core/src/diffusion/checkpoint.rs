//! Binary model container.
//!
//! ```text
//! "PLNF" | u16 version | u16 flags | u32 len | header JSON
//! u32 tensor count
//! per tensor: u16 name len | name | u8 ndim | u32 dims… | payload
//! u32 CRC-32 of everything before it
//! ```
//!
//! All integers are little-endian. The payload is `f32` values, or with
//! flag bit 0 set an `f32` scale followed by one `i8` per value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::{Params, Tensor};

use super::{DenoiserModel, DiffusionError, ModelConfig, ScheduleConfig};

const MAGIC: &[u8; 4] = b"PLNF";
const VERSION: u16 = 1;
const FLAG_INT8: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    Int8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    schedule: ScheduleConfig,
}

/// A model with the schedule it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: DenoiserModel,
    pub schedule: ScheduleConfig,
    pub precision: Precision,
}

/// Symmetric scale for a tensor: `max|w| / 127`, or 1 when all zero.
fn int8_scale(t: &Tensor) -> f64 {
    let max = t.max_abs() as f32 as f64;
    if max > 0.0 {
        max / 127.0
    } else {
        1.0
    }
}

fn quantize_values(t: &Tensor, scale: f64) -> Vec<i8> {
    t.data()
        .iter()
        .map(|&v| (v / scale).round().clamp(-127.0, 127.0) as i8)
        .collect()
}

impl Checkpoint {
    pub fn new(model: DenoiserModel, schedule: ScheduleConfig) -> Self {
        Self {
            model,
            schedule,
            precision: Precision::F32,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, DiffusionError> {
        let header = serde_json::to_vec(&Header {
            model: self.model.config.clone(),
            schedule: self.schedule,
        })
        .map_err(|e| DiffusionError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(64 + header.len() + 4 * self.model.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let flags = if self.precision == Precision::Int8 { FLAG_INT8 } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.model.params.len() as u32).to_le_bytes());
        for (name, t) in self.model.params.iter() {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.ndim() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match self.precision {
                Precision::F32 => {
                    for &v in t.data() {
                        out.extend_from_slice(&(v as f32).to_le_bytes());
                    }
                }
                Precision::Int8 => {
                    let scale = int8_scale(t);
                    out.extend_from_slice(&(scale as f32).to_le_bytes());
                    out.extend(quantize_values(t, scale).into_iter().map(|q| q as u8));
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    /// Parses and verifies a container; 8-bit payloads come back dequantized.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DiffusionError> {
        let bad = |m: &str| DiffusionError::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not a planoforge checkpoint"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u16()?;
        if version != VERSION {
            return Err(DiffusionError::Checkpoint(format!("unsupported version {version}")));
        }
        let flags = r.u16()?;
        let precision = if flags & FLAG_INT8 != 0 { Precision::Int8 } else { Precision::F32 };
        let header_len = r.u32()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(header_len)?).map_err(|e| DiffusionError::Checkpoint(e.to_string()))?;
        let count = r.u32()?;
        let mut params = Params::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| bad("tensor name is not UTF-8"))?
                .to_string();
            let ndim = r.take(1)?[0] as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let data = match precision {
                Precision::F32 => r
                    .take(4 * n)?
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                    .collect(),
                Precision::Int8 => {
                    let scale = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64;
                    r.take(n)?.iter().map(|&b| b as i8 as f64 * scale).collect()
                }
            };
            params.insert(name, Tensor::new(shape, data)?);
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes after tensors"));
        }
        header.schedule.build()?;
        Ok(Self {
            model: DenoiserModel::from_parts(header.model, params)?,
            schedule: header.schedule,
            precision,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<usize, DiffusionError> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, &bytes)?;
        Ok(bytes.len())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DiffusionError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DiffusionError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| DiffusionError::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, DiffusionError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, DiffusionError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorQuantization {
    pub name: String,
    pub scale: f64,
    /// Largest `|w − dequantized(w)|` over the tensor.
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationReport {
    pub f32_bytes: usize,
    pub int8_bytes: usize,
    /// `int8_bytes / f32_bytes`.
    pub size_ratio: f64,
    pub tensors: Vec<TensorQuantization>,
}

/// 8-bit version of `checkpoint`, already dequantized for inference, and
/// the size and error report.
pub fn quantize(checkpoint: &Checkpoint) -> Result<(Checkpoint, QuantizationReport), DiffusionError> {
    let full = Checkpoint {
        precision: Precision::F32,
        ..checkpoint.clone()
    };
    let f32_bytes = full.to_bytes()?.len();
    let int8 = Checkpoint {
        precision: Precision::Int8,
        ..checkpoint.clone()
    };
    let bytes = int8.to_bytes()?;
    let restored = Checkpoint::from_bytes(&bytes)?;
    let tensors = checkpoint
        .model
        .params
        .iter()
        .map(|(name, t)| {
            let q = restored.model.params.get(name).expect("same tensor names");
            let max_abs_error = t
                .data()
                .iter()
                .zip(q.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            TensorQuantization {
                name: name.clone(),
                scale: int8_scale(t),
                max_abs_error,
            }
        })
        .collect();
    let report = QuantizationReport {
        f32_bytes,
        int8_bytes: bytes.len(),
        size_ratio: bytes.len() as f64 / f32_bytes as f64,
        tensors,
    };
    Ok((restored, report))
}
