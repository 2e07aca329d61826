//! Scenario configuration: `[section]` headers followed by `key = value` lines.
//!
//! ```text
//! # barrier crossing at the default resolution
//! [preset]
//! name = barrier_cross
//!
//! [grid]
//! n = 199
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Params;

/// Sections a config file may contain.
pub const SECTIONS: [&str; 7] = ["params", "grid", "time", "init", "controls", "preset", "output"];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let start_col = content.len() - content.trim_start().len() + 1;

            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(parse_err(line_no, start_col + trimmed.len(), "expected `]`"));
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(parse_err(line_no, start_col + 1, format!("unknown section `{name}`")));
                }
                cfg.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }

            let Some(eq) = trimmed.find('=') else {
                return Err(parse_err(line_no, start_col, "expected `key = value`"));
            };
            let key = trimmed[..eq].trim();
            if !is_ident(key) {
                return Err(parse_err(line_no, start_col, format!("invalid key `{key}`")));
            }
            let Some(section) = current.clone() else {
                return Err(parse_err(line_no, start_col, "key outside of any section"));
            };
            let after = &trimmed[eq + 1..];
            let value = after.trim();
            let value_col = start_col + eq + 1 + (after.len() - after.trim_start().len());
            if value.is_empty() {
                return Err(parse_err(line_no, value_col, format!("missing value for `{key}`")));
            }
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            let entries = cfg.sections.get_mut(&section).expect("section inserted above");
            if entries.contains_key(key) {
                return Err(parse_err(line_no, start_col, format!("duplicate key `{key}` in [{section}]")));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: line_no,
                    column: value_col,
                },
            );
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    /// Typed lookup; a present but malformed value is a parse error at its position.
    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                parse_err(
                    e.line,
                    e.column,
                    format!("cannot parse `{}` for [{section}] {key}", e.value),
                )
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list of numbers.
    pub fn get_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    parse_err(e.line, e.column, format!("cannot parse list item `{}`", s.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// `[params]` if present (all coefficients required), otherwise `fallback`.
    pub fn params_or(&self, fallback: Params) -> Result<Params> {
        let Some(section) = self.sections.get("params") else {
            return Ok(fallback);
        };
        let mut raw = BTreeMap::new();
        for key in section.keys() {
            let v: f64 = self.get("params", key)?.expect("key exists");
            raw.insert(key.clone(), v);
        }
        Params::from_map(&raw)
    }

    /// Sets (or overrides) a value, e.g. from a command-line flag.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections.entry(section.to_string()).or_default().insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
                column: 0,
            },
        );
    }

    pub fn remove(&mut self, section: &str, key: &str) {
        if let Some(s) = self.sections.get_mut(section) {
            s.remove(key);
        }
    }
}
