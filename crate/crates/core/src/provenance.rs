use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

pub const PIPELINE_VERSION: &str = concat!("xwalk ", env!("CARGO_PKG_VERSION"));

/// What produced an artifact: code version, seed and input file digests.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub pipeline_version: String,
    pub seed: u64,
    /// Input name to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Provenance {
            pipeline_version: PIPELINE_VERSION.to_string(),
            seed,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, name: &str, bytes: &[u8]) -> Self {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
        self
    }

    pub fn with_file(self, name: &str, path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(self.with_input(name, &bytes))
    }
}
