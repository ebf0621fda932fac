//! Key-value settings with layered precedence: defaults < config file < flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;

use crate::UsageError;

/// A documented setting key.
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    #[allow(dead_code)]
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

pub struct Settings {
    keys: &'static [Key],
    values: BTreeMap<&'static str, String>,
}

fn usage(msg: String) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg))
}

impl Settings {
    /// Resolves `keys` from their defaults, an optional `key = value` file
    /// and explicit flag values, in that order.
    pub fn resolve(
        keys: &'static [Key],
        config: Option<&Path>,
        flags: &[(&'static str, Option<String>)],
    ) -> anyhow::Result<Self> {
        let mut s = Settings {
            keys,
            values: BTreeMap::new(),
        };
        for k in keys {
            if let Some(d) = k.default {
                s.values.insert(k.name, d.to_string());
            }
        }
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    usage(format!("{}:{}: expected `key = value`", path.display(), n + 1))
                })?;
                s.set(k.trim(), v.trim())
                    .map_err(|e| usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        Ok(s)
    }

    fn set(&mut self, name: &str, value: &str) -> anyhow::Result<()> {
        let k = self
            .keys
            .iter()
            .find(|k| k.name == name)
            .ok_or_else(|| usage(format!("unknown setting `{name}`")))?;
        self.values.insert(k.name, value.to_string());
        Ok(())
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, name: &str) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .raw(name)
            .ok_or_else(|| usage(format!("missing required setting `{name}`")))?;
        raw.parse()
            .map_err(|e| usage(format!("invalid value `{raw}` for `{name}`: {e}")))
    }

    pub fn opt<T: FromStr>(&self, name: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(name) {
            None => Ok(None),
            Some(_) => self.get(name).map(Some),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, name: &str) -> anyhow::Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .raw(name)
            .ok_or_else(|| usage(format!("missing required setting `{name}`")))?;
        raw.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|e| usage(format!("invalid item `{t}` in `{name}`: {e}")))
            })
            .collect()
    }

    /// Effective settings as sorted `key = value` lines.
    pub fn render(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    static KEYS: &[Key] = &[key("a", Some("1"), "first"), key("b", None, "second")];

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.txt");
        std::fs::write(&file, "# comment\na = 2\nb = x\n").unwrap();
        let s = Settings::resolve(KEYS, Some(&file), &[("a", Some("3".into()))]).unwrap();
        assert_eq!(s.get::<u32>("a").unwrap(), 3);
        assert_eq!(s.raw("b"), Some("x"));
        let s = Settings::resolve(KEYS, Some(&file), &[("a", None)]).unwrap();
        assert_eq!(s.get::<u32>("a").unwrap(), 2);
        let s = Settings::resolve(KEYS, None, &[]).unwrap();
        assert_eq!(s.get::<u32>("a").unwrap(), 1);
        assert!(s.get::<u32>("b").is_err());
        assert_eq!(s.render(), "a = 1\n");
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.txt");
        std::fs::write(&file, "zzz = 1\n").unwrap();
        let err = Settings::resolve(KEYS, Some(&file), &[]).err().unwrap();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
