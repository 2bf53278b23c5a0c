//! Flat `key = value` text files with optional `[section]` headers.
//! `#` starts a comment. Keys before the first header live in section `""`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    origin: String,
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::parse(&self.origin, format!("missing key `{key}`")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::parse(&self.origin, format!("bad value `{raw}` for `{key}`"))
            }),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.parsed(key, default)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.parsed(key, default)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.parsed(key, default)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.parsed(key, default)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueFile {
    sections: BTreeMap<String, KeyValues>,
}

impl KeyValueFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, KeyValues> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{origin}:{}", lineno + 1);
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(&at, "unterminated section header"))?;
                current = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&at, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(&at, "empty key"));
            }
            let section = sections.entry(current.clone()).or_insert_with(|| KeyValues {
                origin: format!("{origin}[{current}]"),
                ..Default::default()
            });
            section.set(key, value.trim());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The named section, or an empty one.
    pub fn section(&self, name: &str) -> &KeyValues {
        static EMPTY: std::sync::OnceLock<KeyValues> = std::sync::OnceLock::new();
        self.sections
            .get(name)
            .unwrap_or_else(|| EMPTY.get_or_init(KeyValues::default))
    }

    pub fn section_mut(&mut self, name: &str) -> &mut KeyValues {
        self.sections.entry(name.to_string()).or_default()
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }
}
