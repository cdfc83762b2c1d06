//! Service configuration: optional TOML file, then `UUIS_*` environment overrides.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Address the HTTP gateway binds to. Any port may be used.
    pub listen: String,
    /// Directory holding the store file.
    pub data_dir: PathBuf,
    /// Idle minutes after which a session expires.
    pub idle_minutes: u64,
    /// Lifetime of an audit step-up token, in minutes.
    pub audit_token_minutes: u64,
    /// Replacement for the bundled permission catalog and default roles.
    pub catalog_file: Option<PathBuf>,
    /// Organisation and account seed applied by `init`.
    pub seed_file: Option<PathBuf>,
    /// Report comparison name to the asset type names counted for it.
    pub report_aliases: BTreeMap<String, Vec<String>>,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("uuis-data"),
            idle_minutes: 30,
            audit_token_minutes: 10,
            catalog_file: None,
            seed_file: None,
            report_aliases: default_aliases(),
        }
    }
}

pub fn default_aliases() -> BTreeMap<String, Vec<String>> {
    BTreeMap::from([
        ("chairs".to_string(), vec!["chair".to_string()]),
        ("tables".to_string(), vec!["table".to_string()]),
        ("pc".to_string(), vec!["pc".to_string(), "computer".to_string()]),
    ])
}

pub const STORE_FILE: &str = "uuis.sqlite3";

impl Config {
    /// Reads `path` when given, applies environment overrides and validates.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Config::default(),
        };
        config.apply_env(|key| std::env::var(key).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = var("UUIS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("UUIS_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = var("UUIS_IDLE_MINUTES") {
            self.idle_minutes = parse_number("UUIS_IDLE_MINUTES", &v)?;
        }
        if let Some(v) = var("UUIS_AUDIT_TOKEN_MINUTES") {
            self.audit_token_minutes = parse_number("UUIS_AUDIT_TOKEN_MINUTES", &v)?;
        }
        if let Some(v) = var("UUIS_CATALOG_FILE") {
            self.catalog_file = Some(v.into());
        }
        if let Some(v) = var("UUIS_SEED_FILE") {
            self.seed_file = Some(v.into());
        }
        if let Some(v) = var("UUIS_REPORT_ALIASES") {
            self.report_aliases = parse_aliases(&v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.listen
            .parse::<SocketAddr>()
            .map_err(|e| Error::Config(format!("listen address `{}`: {e}", self.listen)))?;
        if self.idle_minutes == 0 {
            return Err(Error::Config("idle_minutes must be positive".into()));
        }
        if self.audit_token_minutes == 0 {
            return Err(Error::Config("audit_token_minutes must be positive".into()));
        }
        for key in ["chairs", "tables", "pc"] {
            match self.report_aliases.get(key) {
                Some(names) if !names.is_empty() => {}
                _ => return Err(Error::Config(format!("report alias `{key}` has no type names"))),
            }
        }
        Ok(())
    }

    pub fn store_path(&self) -> PathBuf {
        self.data_dir.join(STORE_FILE)
    }
}

fn parse_number(key: &str, value: &str) -> Result<u64> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: `{value}` is not a number")))
}

/// `chairs=chair;pc=pc,computer`
pub fn parse_aliases(text: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = default_aliases();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (key, names) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("report alias `{entry}` lacks `=`")))?;
        let names: Vec<String> =
            names.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect();
        out.insert(key.trim().to_string(), names);
    }
    Ok(out)
}
