//! Run manifests and output-directory helpers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use softscreen_core::{Calibration, ScenarioSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

const DETERMINISM: &str =
    "no random seeds are used; every output is a pure function of the calibration, scenario and arguments recorded here";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub args: BTreeMap<String, String>,
    pub config_hash: String,
    pub calibration_hash: String,
    pub calibration: Calibration,
    pub scenario: Option<ScenarioSpec>,
    pub determinism: String,
    /// Output file name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, calibration: &Calibration) -> Self {
        Manifest {
            tool: "softscreen".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: softscreen_core::VERSION.into(),
            command: command.into(),
            args: BTreeMap::new(),
            config_hash,
            calibration_hash: calibration.config_hash(),
            calibration: calibration.clone(),
            scenario: None,
            determinism: DETERMINISM.into(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.into(), value.to_string());
        self
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Collects output files and writes the manifest last.
pub struct OutDir {
    pub root: PathBuf,
    manifest: Manifest,
}

impl OutDir {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.insert(name.into(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(self) -> Result<Manifest> {
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.manifest)
    }
}
