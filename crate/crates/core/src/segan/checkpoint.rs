//! Binary model container: magic, format version, JSON header length, JSON
//! header (architecture, λ, seed, tensor names and shapes), then every tensor
//! as little-endian `f32` in header order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, GanModel};
use super::{SeganError, Tensor};

const MAGIC: &[u8; 8] = b"SEGANCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch: Architecture,
    lambda_l1: f64,
    seed: u64,
    training_steps: u64,
    tensors: Vec<TensorEntry>,
}

pub fn checkpoint_bytes(model: &GanModel) -> Result<Vec<u8>, SeganError> {
    let header = Header {
        arch: model.arch.clone(),
        lambda_l1: model.lambda_l1,
        seed: model.seed,
        training_steps: model.training_steps,
        tensors: model
            .params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| SeganError::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params.values() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<GanModel, SeganError> {
    let bad = |m: &str| SeganError::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(SeganError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() < header_len {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])
        .map_err(|e| SeganError::Checkpoint(e.to_string()))?;
    let mut blob = &body[header_len..];
    let mut params = BTreeMap::new();
    for entry in header.tensors {
        let n: usize = entry.shape.iter().product();
        if blob.len() < 4 * n {
            return Err(bad("truncated parameter data"));
        }
        let data = blob[..4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        blob = &blob[4 * n..];
        params.insert(entry.name, Tensor::new(entry.shape, data)?);
    }
    if !blob.is_empty() {
        return Err(bad("trailing bytes after parameter data"));
    }
    GanModel::from_params(
        header.arch,
        params,
        header.lambda_l1,
        header.seed,
        header.training_steps,
    )
}

pub fn save_checkpoint(model: &GanModel, path: impl AsRef<Path>) -> Result<(), SeganError> {
    std::fs::write(path, checkpoint_bytes(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GanModel, SeganError> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> GanModel {
        let arch = Architecture {
            window_len: 64,
            kernel_width: 5,
            encoder_channels: vec![1, 4, 4],
            disc_channels: vec![4],
            ..Architecture::default()
        };
        let mut m = GanModel::new(arch, 42.0, 5).unwrap();
        m.training_steps = 17;
        m
    }

    #[test]
    fn round_trip_through_file() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.arch, m.arch);
        assert_eq!(back.lambda_l1, 42.0);
        assert_eq!((back.seed, back.training_steps), (5, 17));
        for (name, t) in &m.params {
            let expect: Vec<f64> = t.data().iter().map(|&v| v as f32 as f64).collect();
            assert_eq!(back.params[name].data(), &expect[..]);
        }
        // stored values are already f32-exact, so a second trip is lossless
        assert_eq!(checkpoint_from_bytes(&checkpoint_bytes(&back).unwrap()).unwrap(), back);
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = checkpoint_bytes(&model()).unwrap();
        assert_eq!(&bytes[..8], b"SEGANCKP");
        assert_eq!(bytes[8..12], [1, 0, 0, 0]);
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + header_len]).unwrap();
        assert_eq!(header["arch"]["preemphasis"], 0.95);
        assert_eq!(bytes.len(), 16 + header_len + 4 * model().parameter_count());
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = checkpoint_bytes(&model()).unwrap();
        assert!(checkpoint_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(checkpoint_from_bytes(b"nothing").is_err());
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(checkpoint_from_bytes(&v).is_err());
        let mut v = bytes;
        v.push(0);
        assert!(checkpoint_from_bytes(&v).is_err());
        assert!(matches!(
            load_checkpoint("/nonexistent/model.ckpt"),
            Err(SeganError::Io(_))
        ));
    }
}
