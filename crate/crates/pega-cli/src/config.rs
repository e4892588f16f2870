//! Flag resolution: command line beats `PEGA_*` environment variables beats
//! the `key=value` config file beats built-in defaults. Config keys use the
//! long flag names (`pop=300`, `crossover-rate=0.1`); the environment
//! spelling is uppercase with dashes as underscores (`PEGA_CROSSOVER_RATE`).

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

pub struct Settings {
    entries: HashMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let mut entries = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| format!("config line {}: expected key=value", idx + 1))?;
                entries.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self { entries })
    }

    /// Resolves one option through the precedence chain.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, String> {
        if let Some(value) = cli {
            return Ok(value);
        }
        let env_key = format!("PEGA_{}", key.to_uppercase().replace('-', "_"));
        if let Ok(raw) = std::env::var(&env_key) {
            return raw
                .parse()
                .map_err(|_| format!("{env_key}={raw} does not parse"));
        }
        if let Some(raw) = self.entries.get(key) {
            return raw
                .parse()
                .map_err(|_| format!("config {key}={raw} does not parse"));
        }
        Ok(default)
    }

    /// Resolves a flag that may stay unset: the chain is consulted, but
    /// absence is not an error.
    pub fn resolve_optional<T: FromStr>(
        &self,
        cli: Option<T>,
        key: &str,
    ) -> Result<Option<T>, String> {
        if let Some(value) = cli {
            return Ok(Some(value));
        }
        let env_key = format!("PEGA_{}", key.to_uppercase().replace('-', "_"));
        if let Ok(raw) = std::env::var(&env_key) {
            return raw
                .parse()
                .map(Some)
                .map_err(|_| format!("{env_key}={raw} does not parse"));
        }
        if let Some(raw) = self.entries.get(key) {
            return raw
                .parse()
                .map(Some)
                .map_err(|_| format!("config {key}={raw} does not parse"));
        }
        Ok(None)
    }

    /// Like [`Self::resolve`] but without a default: errors when absent.
    pub fn resolve_required<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<T, String> {
        if let Some(value) = cli {
            return Ok(value);
        }
        let env_key = format!("PEGA_{}", key.to_uppercase().replace('-', "_"));
        if let Ok(raw) = std::env::var(&env_key) {
            return raw
                .parse()
                .map_err(|_| format!("{env_key}={raw} does not parse"));
        }
        if let Some(raw) = self.entries.get(key) {
            return raw
                .parse()
                .map_err(|_| format!("config {key}={raw} does not parse"));
        }
        Err(format!("missing required option --{key}"))
    }
}
