//! Flat `key = value` configuration files with `[section]` headers, merged
//! under the precedence flag > file > built-in default.

use std::collections::BTreeMap;

use anyhow::{bail, Context};

/// Parsed config file: keys are `section.key` (or bare `key` before any
/// section header).
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &str) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {path}"))?;
        Self::parse(&text).with_context(|| format!("in config file {path}"))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got {raw:?}", lineno + 1);
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            values.insert(full, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key} = {raw:?}: {e}"),
            },
        }
    }
}

/// Resolves one setting with precedence flag > file > default, recording the
/// effective value for the config hash.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    pub effective: Vec<(String, String)>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self {
            file,
            effective: Vec::new(),
        }
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: std::str::FromStr + std::fmt::Display + Clone,
        T::Err: std::fmt::Display,
    {
        let resolved = match flag {
            Some(v) => v,
            None => self.file.get_parsed::<T>(key)?.unwrap_or(default),
        };
        self.effective.push((key.to_string(), resolved.to_string()));
        Ok(resolved)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<T>
    where
        T: std::str::FromStr + std::fmt::Display + Clone,
        T::Err: std::fmt::Display,
    {
        let resolved = match flag {
            Some(v) => Some(v),
            None => self.file.get_parsed::<T>(key)?,
        };
        match resolved {
            Some(v) => {
                self.effective.push((key.to_string(), v.to_string()));
                Ok(v)
            }
            None => bail!("missing required setting {key} (flag or config file)"),
        }
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: std::str::FromStr + std::fmt::Display + Clone,
        T::Err: std::fmt::Display,
    {
        let resolved = match flag {
            Some(v) => Some(v),
            None => self.file.get_parsed::<T>(key)?,
        };
        if let Some(v) = &resolved {
            self.effective.push((key.to_string(), v.to_string()));
        }
        Ok(resolved)
    }
}
