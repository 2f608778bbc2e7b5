//! Versioned parameter blobs with a JSON architecture sidecar.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec, Real};

const MAGIC: &[u8; 4] = b"CBNN";
const VERSION: u16 = 1;

pub fn encode_params<R: Real>(params: &[R]) -> Vec<u8> {
    let mut out = Vec::with_capacity(15 + params.len() * R::WIDTH as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(R::WIDTH);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    out.extend_from_slice(&R::to_le_bytes_vec(params));
    out
}

pub fn decode_params<R: Real>(bytes: &[u8]) -> Result<Vec<R>> {
    if bytes.len() < 15 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("not a parameter blob".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported blob version {version}")));
    }
    if bytes[6] != R::WIDTH {
        return Err(Error::Checkpoint(format!("blob holds {}-byte values, expected {}", bytes[6], R::WIDTH)));
    }
    let count = u64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes")) as usize;
    let body = &bytes[15..];
    if body.len() != count * R::WIDTH as usize {
        return Err(Error::Checkpoint("truncated blob".into()));
    }
    Ok(R::from_le_bytes_slice(body))
}

/// Writes `<stem>.bin` and `<stem>.spec.json` under `dir`.
pub fn save_network<R: Real>(net: &Network<R>, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.bin")), encode_params(net.params()))?;
    fs::write(dir.join(format!("{stem}.spec.json")), serde_json::to_vec_pretty(net.spec())?)?;
    Ok(())
}

pub fn load_network<R: Real>(dir: &Path, stem: &str) -> Result<Network<R>> {
    let spec: NetworkSpec = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.spec.json")))?)?;
    let params = decode_params(&fs::read(dir.join(format!("{stem}.bin")))?)?;
    Network::with_params(spec, params)
}
