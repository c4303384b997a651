//! Flat `key = value` text blocks with dotted keys for nesting.
//!
//! ```text
//! # comment
//! junction.rn = 18.6
//! junction.electrode1.gap0 = 190
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    Invalid { key: String, value: String },
    #[error("key `{key}`: {message}")]
    Rejected { key: String, message: String },
}

impl KvError {
    /// The key the error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            KvError::Syntax { .. } => None,
            KvError::Duplicate { key, .. }
            | KvError::Invalid { key, .. }
            | KvError::Rejected { key, .. } => Some(key),
            KvError::Missing(key) => Some(key),
        }
    }
}

/// Ordered map of dotted keys to raw string values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvBlock {
    entries: BTreeMap<String, String>,
}

impl KvBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut block = KvBlock::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(KvError::Syntax { line: idx + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Syntax { line: idx + 1 });
            }
            if block.entries.contains_key(key) {
                return Err(KvError::Duplicate {
                    key: key.to_string(),
                    line: idx + 1,
                });
            }
            block
                .entries
                .insert(key.to_string(), value.trim().to_string());
        }
        Ok(block)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Entries under `prefix.`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvBlock {
        let dotted = format!("{prefix}.");
        KvBlock {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| {
                    k.strip_prefix(&dotted)
                        .map(|rest| (rest.to_string(), v.clone()))
                })
                .collect(),
        }
    }

    /// Inserts every entry of `other` under `prefix.`.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &KvBlock) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        let raw = self
            .get(key)
            .ok_or_else(|| KvError::Missing(key.to_string()))?;
        raw.parse().map_err(|_| KvError::Invalid {
            key: key.to_string(),
            value: raw.to_string(),
        })
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.require(key).map(Some),
        }
    }

    /// Comma-separated list value.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, KvError> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| KvError::Invalid {
                    key: key.to_string(),
                    value: s.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

impl fmt::Display for KvBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Types that serialize to a key = value block.
pub trait ToKv {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock);

    fn to_kv(&self) -> KvBlock {
        let mut out = KvBlock::new();
        self.write_kv("", &mut out);
        out
    }
}

/// Types that can be rebuilt (and re-validated) from a key = value block.
pub trait FromKv: Sized {
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError>;

    fn from_kv(block: &KvBlock) -> Result<Self, KvError> {
        Self::read_kv(block, "")
    }
}

/// Joins a prefix and a field name with a dot, skipping an empty prefix.
pub fn key(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}
