//! Manifest-validated weight container and the `CRNW` v1 file format.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "CRNW" | version: u32 | tensor_count: u32
//! per tensor: name_len: u16 | name: utf-8 | rank: u8 | dims: rank × u32 | data: numel × f32
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{ArchitectureManifest, Layer, TensorSpec, FORMAT_VERSION, LSTM_GATES};
use super::CrnnError;
use crate::tensorops::{GateParams, LstmParams, Tensor};

pub const MAGIC: &[u8; 4] = b"CRNW";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    version: u32,
    order: Vec<String>,
    tensors: HashMap<String, Tensor>,
    lstm: HashMap<String, LstmParams>,
}

impl ModelWeights {
    /// Validates `tensors` against the standard manifest: the name set must
    /// match exactly and every shape must agree.
    pub fn from_tensors(tensors: HashMap<String, Tensor>) -> Result<Self, CrnnError> {
        let manifest = ArchitectureManifest::standard();
        let specs = manifest.tensors();
        for TensorSpec { name, shape } in &specs {
            let t = tensors.get(name).ok_or_else(|| CrnnError::MissingTensor(name.clone()))?;
            if t.shape() != &shape[..] {
                return Err(CrnnError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    got: t.shape().to_vec(),
                });
            }
        }
        if tensors.len() != specs.len() {
            let mut extra: Vec<&String> = tensors.keys().filter(|k| !specs.iter().any(|s| &s.name == *k)).collect();
            extra.sort();
            return Err(CrnnError::ExtraTensor(extra[0].clone()));
        }

        let mut lstm = HashMap::new();
        for layer in &manifest.layers {
            if let Layer::BiLstm { name, .. } = layer {
                for dir in ["fwd", "bwd"] {
                    let prefix = format!("{name}.{dir}");
                    let gate = |g: &str| GateParams {
                        w: tensors[&format!("{prefix}.w_{g}")].clone(),
                        u: tensors[&format!("{prefix}.u_{g}")].clone(),
                        b: tensors[&format!("{prefix}.b_{g}")].clone(),
                    };
                    let [i, f, g, o] = LSTM_GATES;
                    lstm.insert(
                        prefix.clone(),
                        LstmParams {
                            input: gate(i),
                            forget: gate(f),
                            cell: gate(g),
                            output: gate(o),
                        },
                    );
                }
            }
        }
        Ok(Self {
            version: FORMAT_VERSION,
            order: specs.into_iter().map(|s| s.name).collect(),
            tensors,
            lstm,
        })
    }

    /// Structurally valid, untrained weights drawn from a seeded generator.
    ///
    /// Convolution and dense weights are He/Glorot-uniform, batch-norm
    /// statistics are near identity, LSTM weights uniform in `±1/sqrt(hidden)`.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = HashMap::new();
        for TensorSpec { name, shape } in ArchitectureManifest::standard().tensors() {
            let n: usize = shape.iter().product();
            let (lo, hi) = if name.ends_with(".kernel") {
                let fan_in = (shape[0] * shape[1] * shape[2]) as f32;
                let a = (6.0 / fan_in).sqrt();
                (-a, a)
            } else if name.ends_with(".bn.gamma") {
                (0.8, 1.2)
            } else if name.ends_with(".bn.var") {
                (0.5, 1.5)
            } else if name.ends_with(".bn.beta") || name.ends_with(".bn.mean") {
                (-0.1, 0.1)
            } else if name.starts_with("bilstm") {
                let hidden = shape[0] as f32;
                let a = 1.0 / hidden.sqrt();
                (-a, a)
            } else if name.ends_with(".weight") {
                let a = (6.0 / (shape[0] + shape[1]) as f32).sqrt();
                (-a, a)
            } else {
                (-0.05, 0.05)
            };
            let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
            tensors.insert(name, Tensor::new(shape, data).expect("manifest shape"));
        }
        Self::from_tensors(tensors).expect("generated from manifest")
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Panics on a name outside the manifest.
    pub fn tensor(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("tensor {name} not in manifest"))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Parameters for one LSTM direction, e.g. `"bilstm1.fwd"`.
    pub fn lstm(&self, prefix: &str) -> &LstmParams {
        &self.lstm[prefix]
    }

    /// `(name, tensor)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.order.iter().map(|n| (n.as_str(), &self.tensors[n]))
    }

    /// Replaces one tensor, keeping the manifest invariants.
    pub fn with_tensor(mut self, name: &str, t: Tensor) -> Result<Self, CrnnError> {
        self.tensors.insert(name.to_string(), t);
        Self::from_tensors(self.tensors)
    }
}

/// Raw CRNW writer; tensors are written in the given order.
pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>, version: u32) -> Vec<u8> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn encode_weights(w: &ModelWeights) -> Vec<u8> {
    encode_tensors(w.iter(), w.version)
}

pub fn save_weights(w: &ModelWeights, path: impl AsRef<Path>) -> Result<(), CrnnError> {
    fs::write(path, encode_weights(w))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CrnnError> {
        let end = self.pos.checked_add(n).ok_or(CrnnError::TruncatedFile)?;
        let s = self.bytes.get(self.pos..end).ok_or(CrnnError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CrnnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CrnnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CrnnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses CRNW bytes into `(name, tensor)` pairs without manifest checks.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, CrnnError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CrnnError::BadMagic);
    }
    cur.take(4)?;
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(CrnnError::UnsupportedVersion(version));
    }
    let count = cur.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| CrnnError::BadName)?
            .to_string();
        let rank = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(CrnnError::TruncatedFile)?;
        let raw = cur.take(numel.checked_mul(4).ok_or(CrnnError::TruncatedFile)?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if cur.pos != bytes.len() {
        return Err(CrnnError::TrailingData(bytes.len() - cur.pos));
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<ModelWeights, CrnnError> {
    let mut map = HashMap::new();
    for (name, t) in decode_tensors(bytes)? {
        if map.insert(name.clone(), t).is_some() {
            return Err(CrnnError::DuplicateTensor(name));
        }
    }
    ModelWeights::from_tensors(map)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights, CrnnError> {
    decode_weights(&fs::read(path)?)
}
