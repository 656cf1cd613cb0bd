use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA: u32 = 1;

/// Audit record written next to every command's outputs. It is the only file
/// that changes between identical reruns.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub config: Value,
    pub config_hash: String,
    pub out_dir: String,
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// serde_json keeps object keys sorted, so the compact rendering of a parsed
/// document is a canonical form.
pub fn canonical_json(v: &Value) -> String {
    serde_json::to_string(v).expect("values always serialise")
}

pub fn config_hash(v: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(v).as_bytes()))
}
