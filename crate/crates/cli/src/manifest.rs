use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::settings::{Context, SeedSource};
use crate::CliResult;

/// Record written next to every run's outputs. `config` is the fully
/// resolved configuration; passing the manifest back as `--config` repeats
/// the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub engine: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub seed_source: Option<SeedSource>,
    pub threads: usize,
    pub config: serde_json::Value,
    #[serde(default)]
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, ctx: &Context, config: &impl Serialize) -> CliResult<Self> {
        Ok(Manifest {
            engine: "hhfuse".into(),
            version: hhfuse_version(),
            command: command.into(),
            args: ctx.argv.clone(),
            seed: None,
            seed_source: None,
            threads: ctx.threads,
            config: to_value(config)?,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        })
    }

    pub fn with_seed(mut self, seed: u64, source: SeedSource) -> Self {
        self.seed = Some(seed);
        self.seed_source = Some(source);
        self
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn set_summary(&mut self, summary: &impl Serialize) -> CliResult<()> {
        self.summary = to_value(summary)?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

fn to_value(v: &impl Serialize) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| hhfuse::Error::Format(format!("manifest: {e}")).into())
}

/// The engine and driver share the workspace version.
fn hhfuse_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
