//! Run manifests: one JSON document per run recording everything needed to
//! reproduce the outputs byte for byte (no timestamps, no host state).

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub environment: Option<String>,
    pub parameters: Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, environment: Option<&str>, parameters: Value) -> Self {
        RunManifest {
            tool: "hcwalk".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            environment: environment.map(str::to_string),
            parameters,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
