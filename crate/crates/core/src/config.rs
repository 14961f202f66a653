//! Flat `key = value` configuration files.
//!
//! One entry per line; `#` starts a comment; keys are case-sensitive and
//! may repeat only where a reader explicitly allows it (they don't by
//! default). Readers mark the keys they consume so that leftovers can be
//! reported as typos.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config key `{0}` appears more than once")]
    Duplicate(String),
    #[error("missing config key `{0}`")]
    Missing(String),
    #[error("config key `{key}` has invalid value {value:?}: {message}")]
    Invalid { key: String, value: String, message: String },
    #[error("unknown config key(s): {}", .0.join(", "))]
    Unknown(Vec<String>),
}

impl ConfigError {
    pub fn invalid(key: &str, value: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), value: value.to_string(), message: message.into() }
    }
}

#[derive(Debug, Default)]
pub struct KvConfig {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
        }
        Ok(Self { values, used: RefCell::default() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw_opt(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn raw_opt(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    pub fn get<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let v = self.raw(key)?;
        v.parse().map_err(|e: T::Err| ConfigError::invalid(key, v, e.to_string()))
    }

    pub fn get_opt<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw_opt(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e: T::Err| ConfigError::invalid(key, v, e.to_string())),
        }
    }

    /// Comma-separated list of numbers, e.g. `1.5, -2`.
    pub fn get_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.raw(key)?;
        parse_list(key, v)
    }

    pub fn get_list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw_opt(key).map(|v| parse_list(key, v)).transpose()
    }

    /// Fails with [`ConfigError::Unknown`] if any key was never read.
    pub fn ensure_all_used(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        let unknown: Vec<String> = self.values.keys().filter(|k| !used.contains(*k)).cloned().collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown(unknown))
        }
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError::invalid(key, v, e.to_string()))
        })
        .collect()
}

/// Accumulates `key = value` lines in insertion order.
#[derive(Debug, Default, Clone)]
pub struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.out.push_str(&format!("{key} = {value}\n"));
        self
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        self.out.push_str(&format!("# {text}\n"));
        self
    }

    pub fn finish(&self) -> String {
        self.out.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_usage() {
        let c = KvConfig::parse("# header\na = 1.5\n\nb=2 # trailing\nlist = 1, -2.5\n").unwrap();
        assert_eq!(c.get::<f64>("a").unwrap(), 1.5);
        assert_eq!(c.get::<u32>("b").unwrap(), 2);
        assert!(matches!(c.ensure_all_used(), Err(ConfigError::Unknown(k)) if k == ["list"]));
        assert_eq!(c.get_list("list").unwrap(), vec![1.0, -2.5]);
        c.ensure_all_used().unwrap();
    }

    #[test]
    fn errors_name_the_key_or_line() {
        let c = KvConfig::parse("a = x\n").unwrap();
        let e = c.get::<f64>("a").unwrap_err();
        assert!(e.to_string().contains("`a`"));
        let e = c.get::<f64>("zeta").unwrap_err();
        assert_eq!(e.to_string(), "missing config key `zeta`");
        assert!(matches!(KvConfig::parse("ok = 1\nnope\n"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(KvConfig::parse("a=1\na=2"), Err(ConfigError::Duplicate(_))));
    }
}
