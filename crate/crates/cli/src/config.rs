//! Plain-text run configuration: `key = value` lines, `#` comments.
//!
//! Resolution order everywhere: command-line flag, then config file, then
//! built-in default. The effective configuration is echoed into the output
//! directory so every run is reproducible from its artifacts alone.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Clone, Debug, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Data(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(CliError::Data(format!(
                        "{}:{}: expected `key = value`",
                        path.display(),
                        lineno + 1
                    )));
                };
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(ConfigMap { values })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::Data(format!("config key {key} has unparsable value {raw:?}"))
            }),
        }
    }

    /// flag > config > default
    pub fn resolve<T: std::str::FromStr + Clone>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

/// Echo the effective configuration as `key = value` lines.
pub struct EffectiveConfig {
    entries: Vec<(String, String)>,
}

impl EffectiveConfig {
    pub fn new() -> Self {
        EffectiveConfig {
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        std::fs::write(out_dir.join("config.txt"), text)
            .map_err(|e| CliError::Data(format!("cannot write config echo: {e}")))
    }
}
