//! Binary checkpoint format.
//!
//! ```text
//! "MAMN" | version: u32 LE (=1) | manifest_len: u64 LE | manifest (UTF-8) | payload
//! ```
//!
//! The manifest is line oriented: `key value` lines for the configuration and
//! RGB mean, then one `tensor <name> <d0> <d1> ...` line per parameter tensor.
//! The payload is every tensor in manifest order as little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::CheckpointError;
use crate::model::config::NetworkConfig;
use crate::model::params::{param_layout, ModelParams, ParamSpec};
use crate::model::Model;

pub const MAGIC: [u8; 4] = *b"MAMN";
pub const VERSION: u32 = 1;

type Result<T> = std::result::Result<T, CheckpointError>;

fn manifest(model: &Model) -> String {
    let cfg = &model.cfg;
    let mut m = String::new();
    m.push_str(&format!("blocks {}\n", cfg.blocks));
    m.push_str(&format!("channels {}\n", cfg.channels));
    m.push_str(&format!("scale {}\n", cfg.scale));
    m.push_str(&format!("paths {}\n", cfg.paths));
    m.push_str(&format!("csi_stat {}\n", cfg.csi_stat));
    m.push_str(&format!("icd_stat {}\n", cfg.icd_stat));
    m.push_str(&format!("reduction {}\n", cfg.reduction));
    m.push_str(&format!("eps {:?}\n", cfg.eps));
    let [r, g, b] = model.rgb_mean;
    m.push_str(&format!("rgb_mean {r:?} {g:?} {b:?}\n"));
    for spec in model.params.specs() {
        let dims: Vec<String> = spec.dims.iter().map(usize::to_string).collect();
        m.push_str(&format!("tensor {} {}\n", spec.name, dims.join(" ")));
    }
    m
}

/// Serializes a model to bytes.
pub fn encode(model: &Model) -> Vec<u8> {
    let manifest = manifest(model);
    let mut out = Vec::with_capacity(16 + manifest.len() + 4 * model.params.num_params());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for v in model.params.tensors() {
        for x in v.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(model);
    let path = path.as_ref();
    // Write then rename so a crash never leaves a truncated checkpoint behind.
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    decode(&fs::read(path)?)
}

fn bad(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Manifest(msg.into())
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(format!("invalid value {v:?} for {key}")))
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 4 {
        return Err(CheckpointError::BadMagic([0; 4]));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    if bytes.len() < 16 {
        return Err(CheckpointError::LengthMismatch { expected: 16, actual: bytes.len() as u64 });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let rest = (bytes.len() - 16) as u64;
    if mlen > rest {
        return Err(CheckpointError::LengthMismatch { expected: mlen, actual: rest });
    }
    let mend = 16 + mlen as usize;
    let text = std::str::from_utf8(&bytes[16..mend]).map_err(|e| bad(format!("manifest is not UTF-8: {e}")))?;

    let mut cfg = NetworkConfig::default();
    let mut rgb_mean = [0.0f32; 3];
    let mut tensors = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let key = it.next().unwrap();
        let vals: Vec<&str> = it.collect();
        let one = || vals.first().copied().ok_or_else(|| bad(format!("missing value for {key}")));
        match key {
            "blocks" => cfg.blocks = parse(key, one()?)?,
            "channels" => cfg.channels = parse(key, one()?)?,
            "scale" => cfg.scale = parse(key, one()?)?,
            "paths" => cfg.paths = one()?.parse().map_err(|e| bad(format!("{e}")))?,
            "csi_stat" => cfg.csi_stat = one()?.parse().map_err(|e| bad(format!("{e}")))?,
            "icd_stat" => cfg.icd_stat = one()?.parse().map_err(|e| bad(format!("{e}")))?,
            "reduction" => cfg.reduction = parse(key, one()?)?,
            "eps" => cfg.eps = parse(key, one()?)?,
            "rgb_mean" => {
                if vals.len() != 3 {
                    return Err(bad("rgb_mean needs three values"));
                }
                for (m, v) in rgb_mean.iter_mut().zip(&vals) {
                    *m = parse(key, v)?;
                }
            }
            "tensor" => {
                let (name, dims) = vals.split_first().ok_or_else(|| bad("tensor line without a name"))?;
                let dims = dims.iter().map(|d| parse(key, d)).collect::<Result<Vec<usize>>>()?;
                tensors.push(ParamSpec { name: name.to_string(), dims });
            }
            other => return Err(bad(format!("unknown manifest key {other:?}"))),
        }
    }
    cfg.validate().map_err(|e| bad(e.to_string()))?;

    let expected_bytes: u64 = tensors.iter().map(|t| 4 * t.numel() as u64).sum();
    let payload = &bytes[mend..];
    if payload.len() as u64 != expected_bytes {
        return Err(CheckpointError::LengthMismatch { expected: expected_bytes, actual: payload.len() as u64 });
    }

    let layout = param_layout(&cfg);
    if layout.len() != tensors.len() {
        return Err(bad(format!(
            "manifest lists {} tensors, configuration needs {}",
            tensors.len(),
            layout.len()
        )));
    }
    for (want, got) in layout.iter().zip(&tensors) {
        if want.name != got.name || want.dims != got.dims {
            return Err(CheckpointError::ShapeMismatch {
                name: got.name.clone(),
                expected: want.dims.clone(),
                found: got.dims.clone(),
            });
        }
    }

    let mut params = ModelParams::<f32>::zeros(&cfg);
    let mut chunks = payload.chunks_exact(4);
    for v in params.tensors_mut() {
        for (x, b) in v.data.iter_mut().zip(chunks.by_ref()) {
            *x = f32::from_le_bytes(b.try_into().unwrap());
        }
    }
    Ok(Model { cfg, params, rgb_mean })
}
