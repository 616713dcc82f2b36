//! Flag/file configuration resolution: command-line flags override the
//! optional `key=value` config file, which overrides built-in defaults. All
//! randomness flows from the single explicit seed.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

/// Key-value pairs loaded from a plain-text config file (`key=value` lines,
/// `#` comments).
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("config line {} is not key=value: {line:?}", i + 1));
            };
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Resolve one parameter: flag beats file beats default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| format!("config key {key}={raw:?}: {e}")),
            None => Ok(default),
        }
    }

    /// Resolve a comma-separated list.
    pub fn resolve_list<T>(
        &self,
        key: &str,
        flag: Option<&str>,
        default: &[T],
    ) -> Result<Vec<T>, String>
    where
        T: FromStr + Clone,
        T::Err: std::fmt::Display,
    {
        let raw = match flag {
            Some(v) => v.to_string(),
            None => match self.values.get(key) {
                Some(v) => v.clone(),
                None => return Ok(default.to_vec()),
            },
        };
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|e| format!("config key {key}: bad entry {s:?}: {e}"))
            })
            .collect()
    }
}
