//! Flat `key=value` run configuration files with fail-fast unknown keys.
//!
//! Lines are `namespaced.key = value`; `#` starts a comment and blank lines
//! are ignored. Commands take the keys they understand out of the parsed
//! map and then call [`RunConfig::finish`], so a typo in a key name stops
//! the run instead of silently falling back to a default.

use eyecontact::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// An empty configuration; every lookup yields the default.
    pub fn empty() -> Self {
        RunConfig::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, found {raw:?}",
                    number + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", number + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", number + 1)));
            }
        }
        Ok(RunConfig { values })
    }

    /// Removes and parses a key, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key {key}: cannot parse value {raw:?}"))),
        }
    }

    /// Removes and parses a key, falling back to `default`.
    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Fails if any key was never consumed — the fail-fast unknown-key check.
    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.values.keys().next() {
            return Err(Error::Config(format!("unknown config key {key}")));
        }
        Ok(())
    }
}
