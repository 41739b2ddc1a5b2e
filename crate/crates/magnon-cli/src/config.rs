//! Plain-text `key=value` configuration files. Lines are `key = value`,
//! blank lines and `#` comments are ignored, and command-line flags always
//! win over file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {path:?}: {e}")))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "config {path:?} line {}: expected key=value, got '{raw}'",
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    /// Reject keys this command does not understand (typo safety).
    pub fn restrict_to(&self, accepted: &[&str]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if !accepted.contains(&key.as_str()) {
                return Err(CliError::Validation(format!(
                    "config key '{key}' is not understood here (accepted: {})",
                    accepted.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Validation(format!("config key '{key}': cannot parse '{raw}': {e}"))
            }),
        }
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Command-line value if given, else config value, else the default.
pub fn effective<T: FromStr>(
    cli: Option<T>,
    config: &Config,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    match cli {
        Some(v) => Ok(v),
        None => Ok(config.get_parsed(key)?.unwrap_or(default)),
    }
}

/// Same, but with no default: `None` means "not specified anywhere".
pub fn effective_opt<T: FromStr>(
    cli: Option<T>,
    config: &Config,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match cli {
        Some(v) => Ok(Some(v)),
        None => config.get_parsed(key),
    }
}
