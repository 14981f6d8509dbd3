//! Checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "FFTCKPT\0"
//! 8       4     format version, u32 little-endian
//! 12      8     header length H in bytes, u64 little-endian
//! 20      H     UTF-8 JSON header (configs, class names, layer manifest,
//!               tensor manifest)
//! 20+H    ...   tensor data in manifest order, f64 little-endian,
//!               row-major; nothing may follow the last tensor
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BackboneConfig, HeadConfig, Layer, LayerSpec, Model};

pub const MAGIC: &[u8; 8] = b"FFTCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

const PREFIX: usize = 8 + 4 + 8;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    backbone: BackboneConfig,
    head: Option<HeadConfig>,
    class_names: Vec<String>,
    input_side: usize,
    head_start: usize,
    trainable: Vec<bool>,
    layers: Vec<LayerSpec>,
    tensors: Vec<TensorEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn checkpoint_bytes(m: &Model) -> Result<Vec<u8>> {
    let named = m.named_state();
    let header = Header {
        format_version: FORMAT_VERSION,
        backbone: m.backbone_config().clone(),
        head: m.head_config().cloned(),
        class_names: m.class_names().to_vec(),
        input_side: m.input_side(),
        head_start: m.head_start(),
        trainable: m.trainable_flags().to_vec(),
        layers: m.layers().iter().map(Layer::spec).collect(),
        tensors: named.iter().map(|(name, t)| TensorEntry { name: name.clone(), shape: t.shape().to_vec() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let values: usize = named.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(PREFIX + json.len() + 8 * values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &named {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < PREFIX {
        return Err(corrupt(format!("file is {} bytes, shorter than the {PREFIX}-byte prefix", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion { found: version, expected: FORMAT_VERSION });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = &bytes[PREFIX..];
    let header_len = usize::try_from(header_len)
        .ok()
        .filter(|&h| h <= body.len())
        .ok_or_else(|| corrupt(format!("header length {header_len} exceeds the file")))?;
    let header: Header =
        serde_json::from_slice(&body[..header_len]).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.format_version != version {
        return Err(Error::CheckpointVersion { found: header.format_version, expected: FORMAT_VERSION });
    }
    let mut blob = &body[header_len..];

    let layers = header.layers.iter().map(Layer::from_spec).collect::<Result<Vec<_>>>()?;
    let mut m = Model::from_layers(
        layers,
        header.backbone,
        header.head,
        header.class_names,
        header.input_side,
        header.head_start,
    )?;
    if header.trainable.len() != m.layers().len() {
        return Err(corrupt("trainable flags do not match the layer count"));
    }
    m.trainable = header.trainable;

    let mut entries = header.tensors.iter();
    for (i, layer) in m.layers.iter_mut().enumerate() {
        let kind = layer.kind();
        for (slot, tensor) in layer.state_mut() {
            let expected = format!("{i:03}.{kind}.{slot}");
            let entry = entries
                .next()
                .ok_or_else(|| corrupt(format!("manifest is missing tensor {expected}")))?;
            if entry.name != expected || entry.shape != tensor.shape() {
                return Err(corrupt(format!(
                    "manifest entry {} {:?} does not match layer tensor {expected} {:?}",
                    entry.name,
                    entry.shape,
                    tensor.shape()
                )));
            }
            let need = 8 * tensor.len();
            if blob.len() < need {
                return Err(corrupt(format!("truncated data for tensor {expected}")));
            }
            let (chunk, rest) = blob.split_at(need);
            for (dst, src) in tensor.data_mut().iter_mut().zip(chunk.chunks_exact(8)) {
                *dst = f64::from_le_bytes(src.try_into().expect("8 bytes"));
            }
            blob = rest;
        }
    }
    if entries.next().is_some() {
        return Err(corrupt("manifest lists more tensors than the layers hold"));
    }
    if !blob.is_empty() {
        return Err(corrupt(format!("{} unexpected bytes after the last tensor", blob.len())));
    }
    Ok(m)
}

pub fn checkpoint_save(m: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(m)?).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_backbone, truncate_and_attach_head, TrainablePolicy};
    use crate::rng::RngState;

    fn model() -> Model {
        let cfg = BackboneConfig { input_side: 16, skip_connections: true, ..Default::default() };
        let base = build_backbone(&cfg, RngState::new(7)).unwrap();
        let mut m = truncate_and_attach_head(&base, &HeadConfig::with_classes(3), RngState::new(8)).unwrap();
        m.set_class_names(vec!["a".into(), "b".into(), "c".into()]);
        m.set_trainable(TrainablePolicy::HeadOnly).unwrap();
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = checkpoint_bytes(&m).unwrap();
        let back = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(checkpoint_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn truncation_detected() {
        let bytes = checkpoint_bytes(&model()).unwrap();
        for cut in [1, 8, bytes.len() - 20] {
            assert!(matches!(
                checkpoint_from_bytes(&bytes[..bytes.len() - cut]),
                Err(Error::Checkpoint(_))
            ));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(checkpoint_from_bytes(&extra).is_err());
    }

    #[test]
    fn version_bump_is_explicit() {
        let mut bytes = checkpoint_bytes(&model()).unwrap();
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(Error::CheckpointVersion { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = checkpoint_bytes(&model()).unwrap();
        bytes[0] = b'X';
        assert!(checkpoint_from_bytes(&bytes).is_err());
    }
}
