//! Run manifests: every output file is accompanied by a sidecar JSON record
//! of the exact invocation, so any result can be reproduced bit-for-bit
//! (the timestamp is informational and the only field that varies between
//! identical runs).

use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, serde::Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seed: u64,
    pub input_digest: Option<String>,
    pub library_version: String,
    pub timestamp: String,
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(seed: u64, input_digest: Option<String>, parameters: serde_json::Value) -> Self {
        Self {
            command_line: std::env::args().collect(),
            seed,
            input_digest,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            parameters,
        }
    }

    /// Writes the manifest next to `output` as `<output>.manifest.json`.
    pub fn write_for(&self, output: &Path) -> std::io::Result<()> {
        let mut path = output.as_os_str().to_owned();
        path.push(".manifest.json");
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, body)
    }
}

/// SHA-256 digest of a file, hex-encoded.
pub fn file_digest(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
