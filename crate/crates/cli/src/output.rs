//! Run-config echo and output helpers shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ovs_core::{MiouMode, NormalizeMode, Pairing};
use serde::Serialize;

pub const FORMAT_VERSION: &str = concat!("ovs/", env!("CARGO_PKG_VERSION"));

/// The fully resolved settings of one invocation; embedded in every output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub format_version: &'static str,
    pub paths: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalize_mode: Option<NormalizeMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miou_mode: Option<MiouMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_others: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Pairing>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<&'static str, serde_json::Value>,
}

impl RunConfig {
    pub fn new(subcommand: &'static str) -> Self {
        RunConfig {
            subcommand,
            format_version: FORMAT_VERSION,
            ..RunConfig::default()
        }
    }

    pub fn path(mut self, key: &'static str, p: &Path) -> Self {
        self.paths.insert(key, p.display().to_string());
        self
    }

    pub fn extra(mut self, key: &'static str, v: impl Serialize) -> Self {
        self.extra
            .insert(key, serde_json::to_value(v).expect("config value serializes"));
        self
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `<path>.run.json`, the metadata companion of binary and CSV outputs.
pub fn run_sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".run.json");
    PathBuf::from(name)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&text).with_context(|| format!("parsing {}", path.display()))
}
