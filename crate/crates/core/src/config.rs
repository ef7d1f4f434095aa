//! Line-based `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Keys are case-sensitive; a
//! repeated key is an error. Subsystems pick the keys they know and
//! [`KvConfig::finish`] rejects anything left over.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::cell::RefCell;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse {value:?} as a number")]
    NotANumber { key: String, value: String },
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown configuration keys: {0}")]
    Unknown(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Default, Clone)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: idx + 1, text: raw.to_string() });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: idx + 1, key: key.to_string() });
            }
        }
        Ok(Self { entries, used: RefCell::default() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key).map(String::as_str);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    /// Reads `key` as `f64`, falling back to `default` when absent.
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<f64>().map_err(|_| ConfigError::NotANumber {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<usize>().map_err(|_| ConfigError::NotANumber {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(v) => Err(ConfigError::Invalid { key: key.to_string(), reason: format!("{v:?} is not a boolean") }),
        }
    }

    /// Errors if any key was never read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        let unknown: Vec<&str> =
            self.entries.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown(unknown.join(", ")))
        }
    }

    /// Canonical `key = value` dump, sorted by key.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
