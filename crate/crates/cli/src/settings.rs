//! Config loading and seed resolution shared by the subcommands.

use std::path::Path;

use hhfuse::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::CliResult;

pub const SEED_ENV: &str = "HHENGINE_SEED";

#[derive(Debug, Clone)]
pub struct Context {
    pub seed_flag: Option<u64>,
    pub threads: usize,
    pub argv: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

impl Context {
    /// `--seed` wins over the config file, which wins over `HHENGINE_SEED`.
    pub fn resolve_seed(&self, from_config: Option<u64>) -> CliResult<(u64, SeedSource)> {
        if let Some(s) = self.seed_flag {
            return Ok((s, SeedSource::Flag));
        }
        if let Some(s) = from_config {
            return Ok((s, SeedSource::Config));
        }
        match std::env::var(SEED_ENV) {
            Ok(text) => text
                .trim()
                .parse()
                .map(|s| (s, SeedSource::Env))
                .map_err(|_| Error::Config(format!("{SEED_ENV}={text:?} is not an unsigned integer")).into()),
            Err(_) => Ok((0, SeedSource::Default)),
        }
    }
}

/// Reads a TOML config, or the resolved config stored in a manifest when the
/// path ends in `.json`.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<Manifest>(&text)
            .map_err(|e| e.to_string())
            .and_then(|m| serde_json::from_value(m.config).map_err(|e| e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}
