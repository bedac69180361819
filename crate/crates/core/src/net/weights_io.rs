//! Weight file: `"PCUW" | version u32 | config digest [32] | param count u64 | f32 params`,
//! all little-endian, plus a JSON sidecar holding the full [`NetworkConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use super::config::NetworkConfig;
use super::model::NetworkWeights;
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"PCUW";
pub const WEIGHTS_VERSION: u32 = 1;
pub const WEIGHTS_HEADER_LEN: usize = 4 + 4 + 32 + 8;

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_weights(config: &NetworkConfig, w: &NetworkWeights) -> Result<Vec<u8>> {
    w.check_against(config)?;
    let params = w.to_flat();
    let mut buf = Vec::with_capacity(WEIGHTS_HEADER_LEN + 4 * params.len());
    buf.extend_from_slice(&WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&config.digest());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_weights(config: &NetworkConfig, bytes: &[u8], origin: &Path) -> Result<NetworkWeights> {
    if bytes.len() < WEIGHTS_HEADER_LEN {
        return Err(Error::format(origin, "truncated weight header"));
    }
    if bytes[..4] != WEIGHTS_MAGIC {
        return Err(Error::format(origin, "bad weight magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != WEIGHTS_VERSION {
        return Err(Error::format(origin, format!("unsupported weight version {version}")));
    }
    if bytes[8..40] != config.digest() {
        return Err(Error::format(origin, "config digest does not match sidecar"));
    }
    let count = u64::from_le_bytes(bytes[40..48].try_into().unwrap()) as usize;
    if count != config.param_count() || bytes.len() != WEIGHTS_HEADER_LEN + 4 * count {
        return Err(Error::format(origin, "parameter count disagrees with configuration"));
    }
    let values: Vec<f64> = bytes[WEIGHTS_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    NetworkWeights::from_flat(config, &values)
}

/// Write the weight file and its JSON sidecar.
pub fn write_weights(config: &NetworkConfig, w: &NetworkWeights, path: &Path) -> Result<()> {
    fs::write(path, encode_weights(config, w)?).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(config).expect("config serializes");
    json.push('\n');
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Read a weight file, taking the configuration from its sidecar.
pub fn read_weights(path: &Path) -> Result<(NetworkConfig, NetworkWeights)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let config: NetworkConfig = serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let w = decode_weights(&config, &bytes, path)?;
    Ok((config, w))
}
