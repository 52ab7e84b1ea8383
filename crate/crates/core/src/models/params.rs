use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{decode_tnsr, encode_tnsr, DType, Tensor};

const MANIFEST: &str = "manifest.json";

/// Named, ordered parameter tensors of one network.
#[derive(Clone, Debug)]
pub struct NetworkParams {
    name: String,
    architecture_tag: String,
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest {
    name: String,
    architecture_tag: String,
    config_hash: String,
    parameters: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
}

impl NetworkParams {
    pub fn new(name: impl Into<String>, architecture_tag: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            architecture_tag: architecture_tag.into(),
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn architecture_tag(&self) -> &str {
        &self.architecture_tag
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}` in {}", self.name)));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, t));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::InvalidArgument(format!("network {} has no parameter `{name}`", self.name)))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grad(&self) {
        self.entries.iter().for_each(|(_, t)| t.zero_grad());
    }

    /// Fresh trainable copies with no shared storage.
    pub fn deep_clone(&self) -> Self {
        self.rebuild(true)
    }

    /// Copies that do not require gradients. Gradients still flow through the
    /// network to its inputs.
    pub fn frozen(&self) -> Self {
        self.rebuild(false)
    }

    fn rebuild(&self, requires_grad: bool) -> Self {
        let mut out = Self::new(self.name.clone(), self.architecture_tag.clone());
        for (n, t) in &self.entries {
            let copy = Tensor::leaf(t.to_vec(), t.shape(), requires_grad).expect("shape already valid");
            out.push(n.clone(), copy).expect("names already unique");
        }
        out
    }

    /// Whether both hold the same names, shapes and bit-identical values.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|((na, a), (nb, b))| {
                na == nb
                    && a.shape() == b.shape()
                    && a.data().iter().zip(b.data().iter()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (n, t) in &self.entries {
            h.update(n.as_bytes());
            for d in t.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in t.data().iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Writes one `TNSR` file per parameter plus `manifest.json`.
    pub fn save(&self, dir: &Path, config_hash: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut parameters = Vec::with_capacity(self.entries.len());
        for (n, t) in &self.entries {
            let file = format!("{n}.tnsr");
            fs::write(dir.join(&file), encode_tnsr(t.shape(), &t.data(), DType::F64))?;
            parameters.push(ManifestEntry { name: n.clone(), file, shape: t.shape().to_vec() });
        }
        let manifest = CheckpointManifest {
            name: self.name.clone(),
            architecture_tag: self.architecture_tag.clone(),
            config_hash: config_hash.to_string(),
            parameters,
        };
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Loads a checkpoint directory; returns the parameters and the stored
    /// config hash. Parameters come back trainable.
    pub fn load(dir: &Path) -> Result<(Self, String)> {
        let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        let mut out = Self::new(manifest.name, manifest.architecture_tag);
        for e in manifest.parameters {
            if e.file.contains('/') || e.file.contains("..") {
                return Err(Error::Format(format!("checkpoint file name `{}` escapes its directory", e.file)));
            }
            let (shape, data, _) = decode_tnsr(&fs::read(dir.join(&e.file))?)?;
            if shape != e.shape {
                return Err(Error::Format(format!(
                    "parameter `{}` has shape {shape:?} on disk but {:?} in the manifest",
                    e.name, e.shape
                )));
            }
            out.push(e.name, Tensor::parameter(data, &shape)?)?;
        }
        Ok((out, manifest.config_hash))
    }
}

/// He-uniform initialization: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub(crate) fn he_uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::parameter(data, shape).expect("consistent shape")
}

pub(crate) fn constant_param(shape: &[usize], v: f64) -> Tensor {
    Tensor::parameter(vec![v; shape.iter().product()], shape).expect("consistent shape")
}

/// Adds `<prefix>.weight` `[co,ci,k,k]` and `<prefix>.bias` `[co]`.
pub(crate) fn push_conv(p: &mut NetworkParams, rng: &mut impl Rng, prefix: &str, ci: usize, co: usize, k: usize) -> Result<()> {
    p.push(format!("{prefix}.weight"), he_uniform(rng, &[co, ci, k, k], ci * k * k))?;
    p.push(format!("{prefix}.bias"), constant_param(&[co], 0.0))
}

/// Adds `<prefix>.weight` `[out,in]` and `<prefix>.bias` `[out]`.
pub(crate) fn push_dense(p: &mut NetworkParams, rng: &mut impl Rng, prefix: &str, fan_in: usize, out: usize) -> Result<()> {
    p.push(format!("{prefix}.weight"), he_uniform(rng, &[out, fan_in], fan_in))?;
    p.push(format!("{prefix}.bias"), constant_param(&[out], 0.0))
}

pub(crate) fn conv(p: &NetworkParams, prefix: &str, x: &Tensor, stride: usize) -> Result<Tensor> {
    let w = p.get(&format!("{prefix}.weight"))?;
    let pad = w.shape()[2] / 2;
    x.conv2d(w, Some(p.get(&format!("{prefix}.bias"))?), stride, pad)
}

/// `x @ W^T + b` for `x: [N, in]`.
pub(crate) fn dense(p: &NetworkParams, prefix: &str, x: &Tensor) -> Result<Tensor> {
    let w = p.get(&format!("{prefix}.weight"))?;
    x.matmul(&w.t()?)?.add(p.get(&format!("{prefix}.bias"))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> NetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = NetworkParams::new("net", "tag");
        push_conv(&mut p, &mut rng, "c1", 2, 3, 3).unwrap();
        push_dense(&mut p, &mut rng, "fc", 4, 2).unwrap();
        p
    }

    #[test]
    fn names_are_unique() {
        let mut p = sample();
        assert!(p.push("c1.weight", Tensor::zeros(&[1])).is_err());
        assert!(p.get("missing").is_err());
    }

    #[test]
    fn save_load_bit_exact() {
        let p = sample();
        let dir = tempfile::tempdir().unwrap();
        p.save(dir.path(), "abc").unwrap();
        let (q, hash) = NetworkParams::load(dir.path()).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(q.architecture_tag(), "tag");
        assert!(p.bit_identical(&q));
        assert_eq!(p.fingerprint(), q.fingerprint());
    }

    #[test]
    fn frozen_copies_do_not_require_grad() {
        let p = sample();
        let f = p.frozen();
        assert!(f.tensors().iter().all(|t| !t.requires_grad()));
        assert!(p.bit_identical(&f));
    }
}
