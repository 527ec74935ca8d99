use std::fmt;
use std::path::{Path, PathBuf};

use kronshrink::io::write_json;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const SEED_ENV: &str = "KRONSHRINK_SEED";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Capability(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Capability(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Capability(m) => f.write_str(m),
        }
    }
}

impl From<kronshrink::Error> for Failure {
    fn from(e: kronshrink::Error) -> Self {
        match e {
            kronshrink::Error::Capability(_) => Self::Capability(e.to_string()),
            other => Self::Usage(other.to_string()),
        }
    }
}

macro_rules! usage {
    ($($t:tt)*) => { $crate::config::Failure::Usage(format!($($t)*)) };
}
pub(crate) use usage;

/// Reads a command config. A manifest written by a previous run is accepted
/// in place of a bare config.
pub fn load<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C, Failure> {
    let Some(path) = path else { return Ok(C::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| usage!("{}: {e}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage!("{}: {e}", path.display()))?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("command") && obj.contains_key("config") {
            value = obj.remove("config").unwrap_or_default();
        }
    }
    serde_json::from_value(value).map_err(|e| usage!("{}: {e}", path.display()))
}

/// Flag, then config file, then `KRONSHRINK_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

pub fn input_path(p: Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    let p = p.ok_or_else(|| usage!("missing {what}"))?;
    p.canonicalize().map_err(|e| usage!("{what} {}: {e}", p.display()))
}

/// Absolute output directory, created if missing.
pub fn output_dir(p: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let p = p.ok_or_else(|| usage!("missing --out"))?;
    std::fs::create_dir_all(&p).map_err(|e| usage!("cannot create {}: {e}", p.display()))?;
    p.canonicalize().map_err(|e| usage!("{}: {e}", p.display()))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C> {
    pub tool: &'a str,
    pub version: &'a str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    /// Values derived during the run (chosen weights, counts).
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub results: serde_json::Value,
}

pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &C,
    results: serde_json::Value,
) -> Result<(), Failure> {
    let m = Manifest { tool: "kronshrink", version: env!("CARGO_PKG_VERSION"), command, seed, config, results };
    Ok(write_json(&dir.join(MANIFEST), &m)?)
}
