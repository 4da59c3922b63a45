use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Tool version, input digests and effective parameters of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &'static str, inputs: Vec<InputDigest>, parameters: serde_json::Value) -> Self {
        Self {
            tool: "splithalf",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            parameters,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
