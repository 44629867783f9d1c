//! Flat key-value configuration files with dotted sections:
//!
//! ```text
//! # comment
//! solver.name = nasa
//! problem.n = 20
//! run.n_list = 100,1000
//! ```
//!
//! Keys are tracked as they are consumed so that typos surface as
//! "unknown key" errors instead of silently applied defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(HarnessError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(HarnessError::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(Config {
            values,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn from_pairs(pairs: &[(&str, String)]) -> Self {
        Config {
            values: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key).map(|s| s.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn require(&self, key: &str) -> Result<&str, HarnessError> {
        self.raw(key)
            .ok_or_else(|| HarnessError::Config(format!("missing required key `{key}`")))
    }

    pub fn optional(&self, key: &str) -> Option<&str> {
        self.raw(key)
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| HarnessError::Config(format!("key `{key}`: cannot parse `{s}`"))),
        }
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, HarnessError> {
        let s = self.require(key)?;
        s.parse()
            .map_err(|_| HarnessError::Config(format!("key `{key}`: cannot parse `{s}`")))
    }

    pub fn get_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, HarnessError> {
        let s = self.require(key)?;
        s.split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("key `{key}`: cannot parse `{part}`")))
            })
            .collect()
    }

    /// Fail on unconsumed keys (likely typos).
    pub fn finish(&self) -> Result<(), HarnessError> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(format!(
                "unknown keys: {}",
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }

    /// Canonical serialization (sorted keys), used for the config echo.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_values() {
        let cfg = Config::parse("# header\n\nsolver.name = nasa\nrun.seeds= 20\n").unwrap();
        assert_eq!(cfg.require("solver.name").unwrap(), "nasa");
        assert_eq!(cfg.get::<usize>("run.seeds").unwrap(), 20);
        cfg.finish().unwrap();
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        assert!(Config::parse("just a line\n").is_err());
        assert!(Config::parse(" = 3\n").is_err());
    }

    #[test]
    fn unknown_keys_are_reported() {
        let cfg = Config::parse("solver.name = nasa\nsolvr.typo = 1\n").unwrap();
        let _ = cfg.require("solver.name").unwrap();
        let err = cfg.finish().unwrap_err();
        assert!(err.to_string().contains("solvr.typo"));
    }

    #[test]
    fn list_parsing() {
        let cfg = Config::parse("run.n_list = 100, 1000,10000\n").unwrap();
        assert_eq!(cfg.get_list::<usize>("run.n_list").unwrap(), vec![100, 1000, 10000]);
    }

    #[test]
    fn echo_is_sorted_and_reparses() {
        let cfg = Config::parse("b.z = 2\na.y = 1\n").unwrap();
        let echo = cfg.echo();
        assert_eq!(echo, "a.y = 1\nb.z = 2\n");
        let again = Config::parse(&echo).unwrap();
        assert_eq!(again.echo(), echo);
    }
}
