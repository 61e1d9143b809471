use std::fs;
use std::path::{Path, PathBuf};

use kirchhoff::io::write_atomic;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{CliError, OUTPUT_DIR_ENV};

const FALLBACK_DIR: &str = "kirchhoff-output";

/// A parsed config together with its hash and output directory.
pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub sha256: String,
    pub out: Output,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn load(path: &Path, out_flag: Option<&Path>) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = RunConfig::parse(&text)?;
    let sha256 = sha256_hex(text.as_bytes());
    let dir = resolve_dir(out_flag, config.run.output_dir.as_deref());
    Ok(Loaded {
        out: Output {
            dir,
            sha256: sha256.clone(),
            context: None,
        },
        config,
        text,
        sha256,
    })
}

/// --out, then `run.output_dir`, then the environment, then a fixed default.
fn resolve_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| configured.map(Path::to_path_buf))
        .or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(FALLBACK_DIR))
}

/// Destination for one command's files. Every file carries the config hash.
#[derive(Clone, Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub sha256: String,
    /// Extra provenance, e.g. the sweep value of a run.
    pub context: Option<String>,
}

impl Output {
    pub fn child(&self, name: &str, context: String) -> Output {
        Output {
            dir: self.dir.join(name),
            sha256: self.sha256.clone(),
            context: Some(context),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Metadata line for CSV files.
    pub fn header(&self, what: &str) -> String {
        match &self.context {
            Some(c) => format!("config_sha256={} {what} {c}", self.sha256),
            None => format!("config_sha256={} {what}", self.sha256),
        }
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    /// Serializes `value` as a JSON object with `config_sha256` (and the
    /// context, if any) added at the top level.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut json = serde_json::to_value(value)?;
        let obj = json
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{name}: output is not a JSON object")))?;
        obj.insert("config_sha256".into(), self.sha256.clone().into());
        if let Some(c) = &self.context {
            obj.insert("context".into(), c.clone().into());
        }
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}
