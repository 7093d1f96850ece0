use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ConditionalInn, InnConfig, NamedTensor};
use super::tensor::Real;
use super::InnError;
use crate::error::{Error, Result};

pub const CINN_MAGIC: &[u8; 4] = b"CINN";
pub const CINN_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: InnConfig,
    tensors: Vec<TensorInfo>,
}

/// Magic, u16 version, u32 header length, JSON header (configuration and
/// tensor list), then each tensor as little-endian f32 in header order.
pub fn encode_weights<T: Real>(net: &ConditionalInn<T>) -> Vec<u8> {
    let tensors = net.export();
    let header = Header {
        config: net.config,
        tensors: tensors
            .iter()
            .map(|t| TensorInfo {
                name: t.name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CINN_MAGIC);
    out.extend_from_slice(&CINN_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in &tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_weights<T: Real>(bytes: &[u8]) -> Result<ConditionalInn<T>, InnError> {
    let bad = |m: String| InnError::WeightFormat(m);
    if bytes.len() < 10 || &bytes[..4] != CINN_MAGIC {
        return Err(bad("missing CINN magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CINN_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let json = bytes
        .get(10..10 + len)
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("header: {e}")))?;
    let mut offset = 10 + len;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for info in header.tensors {
        let n: usize = info.shape.iter().product();
        let blob = bytes
            .get(offset..offset + 4 * n)
            .ok_or_else(|| bad(format!("truncated tensor {}", info.name)))?;
        offset += 4 * n;
        tensors.push(NamedTensor {
            name: info.name,
            shape: info.shape,
            data: blob
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        });
    }
    if offset != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - offset)));
    }
    let mut net = ConditionalInn::new(InnConfig {
        init: super::network::Init::Zero,
        ..header.config
    })?;
    net.config = header.config;
    net.import(&tensors)?;
    Ok(net)
}

pub fn save_weights<T: Real>(path: &Path, net: &ConditionalInn<T>) -> Result<()> {
    std::fs::write(path, encode_weights(net)).map_err(|e| Error::io(path, e))
}

pub fn load_weights<T: Real>(path: &Path) -> Result<ConditionalInn<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_weights(&bytes)?)
}
