//! Self-describing binary tensor container used for parameter checkpoints
//! (and any other named-tensor payload, e.g. fitted copula models).
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  "FSCN" | version u32 | meta_len u64 | meta (UTF-8 JSON)
//! n_entries u64
//! per entry: name_len u64 | name | ndim u64 | dims u64 × ndim
//!            | values f64 × prod(dims), row-major
//! ```
//!
//! The meta JSON string is stored verbatim and re-emitted verbatim, so a
//! read/write cycle is byte-exact.

use super::nets::{check_params, schema, NetConfig};
use super::params::{ModelParams, Role, TensorMap};
use super::GenError;
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Leading magic bytes of the container format.
pub const CONTAINER_MAGIC: [u8; 4] = *b"FSCN";
/// Current container format version.
pub const CONTAINER_VERSION: u32 = 1;
/// Sanity cap on length fields while reading (guards corrupt files).
const MAX_FIELD_BYTES: u64 = 1 << 33;

/// One named tensor: shape plus row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainerEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// An ordered collection of named tensors plus a JSON metadata blob.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorContainer {
    pub meta_json: String,
    pub entries: Vec<ContainerEntry>,
}

impl TensorContainer {
    pub fn new(meta_json: String) -> Self {
        Self {
            meta_json,
            entries: Vec::new(),
        }
    }

    /// Append a tensor, flattening row-major.
    pub fn push_tensor(&mut self, name: impl Into<String>, tensor: &ArrayD<f64>) {
        self.entries.push(ContainerEntry {
            name: name.into(),
            shape: tensor.shape().to_vec(),
            data: tensor.iter().copied().collect(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&ContainerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&CONTAINER_MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        let meta = self.meta_json.as_bytes();
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(meta)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for entry in &self.entries {
            let name = entry.name.as_bytes();
            w.write_all(&(name.len() as u64).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(entry.shape.len() as u64).to_le_bytes())?;
            for dim in &entry.shape {
                w.write_all(&(*dim as u64).to_le_bytes())?;
            }
            for value in &entry.data {
                w.write_all(&value.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, GenError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != CONTAINER_MAGIC {
            return Err(GenError::Checkpoint(format!(
                "bad magic {magic:?}, expected {CONTAINER_MAGIC:?}"
            )));
        }
        let version = read_u32(r)?;
        if version != CONTAINER_VERSION {
            return Err(GenError::Checkpoint(format!(
                "unsupported format version {version}, expected {CONTAINER_VERSION}"
            )));
        }
        let meta_len = read_len(r, "meta length")?;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let meta_json = String::from_utf8(meta)
            .map_err(|e| GenError::Checkpoint(format!("meta is not UTF-8: {e}")))?;
        let n_entries = read_len(r, "entry count")?;
        let mut entries = Vec::with_capacity(n_entries.min(1024));
        for _ in 0..n_entries {
            let name_len = read_len(r, "name length")?;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|e| GenError::Checkpoint(format!("name is not UTF-8: {e}")))?;
            let ndim = read_len(r, "rank")?;
            let mut shape = Vec::with_capacity(ndim.min(16));
            for _ in 0..ndim {
                shape.push(read_len(r, "dimension")?);
            }
            let count: usize = shape.iter().product();
            if (count as u64) * 8 > MAX_FIELD_BYTES {
                return Err(GenError::Checkpoint(format!(
                    "tensor {name} declares {count} values"
                )));
            }
            let mut data = Vec::with_capacity(count);
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            entries.push(ContainerEntry { name, shape, data });
        }
        Ok(Self { meta_json, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), GenError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize, GenError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let v = u64::from_le_bytes(buf);
    if v > MAX_FIELD_BYTES {
        return Err(GenError::Checkpoint(format!("implausible {what}: {v}")));
    }
    Ok(v as usize)
}

/// Metadata stored with a generator/discriminator checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: String,
    pub net: NetConfig,
    pub epoch: u64,
}

/// Bundle both networks (generator entries first) with their config and the
/// global epoch into one container.
pub fn checkpoint_models(
    cfg: &NetConfig,
    params_g: &ModelParams,
    params_d: &ModelParams,
    epoch: u64,
) -> Result<TensorContainer, GenError> {
    check_params(params_g, cfg)?;
    check_params(params_d, cfg)?;
    let meta = CheckpointMeta {
        kind: "model_pair".into(),
        net: cfg.clone(),
        epoch,
    };
    let meta_json = serde_json::to_string(&meta)
        .map_err(|e| GenError::Checkpoint(format!("meta serialization: {e}")))?;
    let mut container = TensorContainer::new(meta_json);
    for params in [params_g, params_d] {
        for (name, tensor) in params.iter() {
            container.push_tensor(name, tensor);
        }
    }
    Ok(container)
}

/// Rebuild `(net, generator, discriminator, epoch)` from a checkpoint
/// container, validating the schema along the way.
pub fn restore_models(
    container: &TensorContainer,
) -> Result<(NetConfig, ModelParams, ModelParams, u64), GenError> {
    let meta: CheckpointMeta = serde_json::from_str(&container.meta_json)
        .map_err(|e| GenError::Checkpoint(format!("meta parse: {e}")))?;
    if meta.kind != "model_pair" {
        return Err(GenError::Checkpoint(format!(
            "container kind {:?}, expected \"model_pair\"",
            meta.kind
        )));
    }
    meta.net.validate()?;
    let rebuild = |role: Role| -> Result<ModelParams, GenError> {
        let mut map = TensorMap::new();
        for (name, shape) in schema(&meta.net, role) {
            let entry = container
                .get(&name)
                .ok_or_else(|| GenError::Checkpoint(format!("missing tensor {name}")))?;
            if entry.shape != shape {
                return Err(GenError::ShapeMismatch {
                    name,
                    expected: shape,
                    got: entry.shape.clone(),
                });
            }
            let tensor = ArrayD::from_shape_vec(IxDyn(&entry.shape), entry.data.clone())
                .map_err(|e| GenError::Checkpoint(format!("tensor {name}: {e}")))?;
            map.insert(name, tensor);
        }
        Ok(ModelParams::new(role, map))
    };
    let g = rebuild(Role::Generator)?;
    let d = rebuild(Role::Discriminator)?;
    Ok((meta.net, g, d, meta.epoch))
}
