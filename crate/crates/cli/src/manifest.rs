//! Run manifests: the resolved configuration, the invocation and SHA-256
//! digests of every input and output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// What a run did, with absolute input paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Generate,
    Inject {
        data: PathBuf,
    },
    Train {
        data: PathBuf,
    },
    Detect {
        model: PathBuf,
        data: PathBuf,
        /// Present when `data` already carries attacks.
        labels: Option<PathBuf>,
    },
    Evaluate {
        verdicts: PathBuf,
        oracle: bool,
    },
    Sweep {
        model: PathBuf,
        data: PathBuf,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Generate => "generate",
            Invocation::Inject { .. } => "inject",
            Invocation::Train { .. } => "train",
            Invocation::Detect { .. } => "detect",
            Invocation::Evaluate { .. } => "evaluate",
            Invocation::Sweep { .. } => "sweep",
        }
    }

    pub fn inputs(&self) -> Vec<&Path> {
        match self {
            Invocation::Generate => vec![],
            Invocation::Inject { data } | Invocation::Train { data } => vec![data],
            Invocation::Detect { model, data, labels } => {
                let mut v: Vec<&Path> = vec![model, data];
                v.extend(labels.as_deref());
                v
            }
            Invocation::Evaluate { verdicts, .. } => vec![verdicts],
            Invocation::Sweep { model, data } => vec![model, data],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub invocation: Invocation,
    /// Input path → digest.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the run directory) → digest. Empty
    /// until the run completes.
    pub outputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(invocation: Invocation, config: RunConfig) -> CliResult<Manifest> {
        let mut inputs = BTreeMap::new();
        for p in invocation.inputs() {
            inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        Ok(Manifest {
            tool: format!("piconvae {}", env!("CARGO_PKG_VERSION")),
            invocation,
            inputs,
            outputs: BTreeMap::new(),
            config,
        })
    }

    pub fn record_outputs(&mut self, dir: &Path, names: &[String]) -> CliResult<()> {
        for n in names {
            self.outputs.insert(n.clone(), sha256_file(&dir.join(n))?);
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = toml::to_string(self).map_err(|e| CliError::Data(format!("manifest: {e}")))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(CliError::io(&path))
    }

    /// Reads a manifest file, or `manifest.toml` inside a run directory.
    pub fn read(path: &Path) -> CliResult<Manifest> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> CliResult<Vec<String>> {
        let mut changed = Vec::new();
        for (p, digest) in &self.inputs {
            if &sha256_file(Path::new(p))? != digest {
                changed.push(p.clone());
            }
        }
        Ok(changed)
    }
}
