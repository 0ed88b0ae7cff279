//! Output directory with a content-hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Reads an input file, remembering its hash for the manifest.
#[derive(Debug, Default)]
pub struct Inputs {
    hashes: BTreeMap<String, String>,
}

impl Inputs {
    pub fn read(&mut self, path: &str) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Config(format!("{path}: file not found")),
            _ => CliError::Config(format!("{path}: {e}")),
        })?;
        self.hashes.insert(path.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

pub struct OutputDir {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root)
            .map_err(|e| CliError::Config(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root,
            hashes: BTreeMap::new(),
        })
    }

    /// Writes `bytes` to `name` relative to the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Config(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Renders with a library writer and stores the result.
    pub fn render(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> ratemig::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(CliError::from_lib)?;
        self.write(name, &buf)
    }

    pub fn finish(mut self, command: &str, config: &RunConfig, inputs: &Inputs) -> Result<()> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: &inputs.hashes,
            outputs: &self.hashes,
        };
        let mut buf = serde_json::to_vec_pretty(&manifest).map_err(CliError::config)?;
        buf.push(b'\n');
        self.write("manifest.json", &buf)
    }
}
