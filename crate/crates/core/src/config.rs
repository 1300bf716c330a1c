//! Flat `key = value` configuration files with dotted section prefixes.
//!
//! ```text
//! # comment
//! isotope = li7
//! coil.radius_m = 0.015
//! currents.list = 0, 0.5, 1.0
//! ```

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed configuration. Getters record which keys were read so leftovers can be reported.
#[derive(Debug, Default)]
pub struct Config {
    path: Option<PathBuf>,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str, path: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let where_ = || path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<config>"));
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    path: where_(),
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    path: where_(),
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(Error::Parse {
                    path: where_(),
                    line,
                    message: format!("key `{key}` already set on line {}", prev.line),
                });
            }
        }
        Ok(Config {
            path: path.map(Path::to_path_buf),
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, Some(path))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Sets or replaces a value, as command-line overrides do.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.into(),
                line: 0,
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let e = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(&e.value)
    }

    /// Parses the value of `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::config(key, "required key is missing"))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|e| Error::config(key, format!("cannot parse list item `{item}`: {e}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Keys that were never read, sorted.
    pub fn unused_keys(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }

    /// Fails on the first key no getter asked for.
    pub fn reject_unused(&self) -> Result<()> {
        match self.unused_keys().into_iter().next() {
            Some(k) => Err(Error::config(k, "unknown key")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_lists() {
        let text = "# header\nisotope = li7  # trailing\n\ncoil.radius_m=0.015\ncurrents.list = 0, 0.5,1\n";
        let c = Config::parse(text, None).unwrap();
        assert_eq!(c.raw("isotope"), Some("li7"));
        assert_eq!(c.require::<f64>("coil.radius_m").unwrap(), 0.015);
        assert_eq!(c.get_list::<f64>("currents.list").unwrap().unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(c.unused_keys().is_empty());
    }

    #[test]
    fn errors_name_the_key_or_line() {
        let c = Config::parse("order = two\n", None).unwrap();
        let e = c.require::<u32>("order").unwrap_err().to_string();
        assert!(e.contains("`order`"), "{e}");
        let e = c.require::<f64>("beam.s_par").unwrap_err().to_string();
        assert!(e.contains("beam.s_par"));
        let e = Config::parse("a = 1\nnonsense\n", Some(Path::new("run.cfg"))).unwrap_err().to_string();
        assert!(e.starts_with("run.cfg:2:"), "{e}");
        assert!(Config::parse("a = 1\na = 2\n", None).is_err());
    }

    #[test]
    fn unknown_keys_are_reported() {
        let c = Config::parse("order = 1\ncoil.radus_m = 0.01\n", None).unwrap();
        let _ = c.get::<u32>("order").unwrap();
        let e = c.reject_unused().unwrap_err().to_string();
        assert!(e.contains("coil.radus_m"), "{e}");
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = Config::parse("order = 1\n", None).unwrap();
        c.set("order", "2");
        assert_eq!(c.require::<u32>("order").unwrap(), 2);
        assert_eq!(c.get_or("seed", 42u64).unwrap(), 42);
    }
}
