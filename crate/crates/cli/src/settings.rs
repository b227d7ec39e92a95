//! Effective configuration: command-line flag, else config file, else the
//! built-in default. Every resolved value is recorded in the run manifest.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::manifest::Manifest;

/// A parsed TOML config file. Keys are looked up in the command's own
/// table first (`[train]`, `[prepare-data]`, ...) and then at top level.
#[derive(Debug, Default)]
pub struct Settings {
    table: toml::Table,
    path: Option<PathBuf>,
}

pub trait Setting: Sized + Display {
    fn from_toml(v: &toml::Value) -> Option<Self>;
    const KIND: &'static str;
}

impl Setting for u64 {
    const KIND: &'static str = "non-negative integer";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_integer().and_then(|i| u64::try_from(i).ok())
    }
}

impl Setting for usize {
    const KIND: &'static str = "non-negative integer";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_integer().and_then(|i| usize::try_from(i).ok())
    }
}

impl Setting for f64 {
    const KIND: &'static str = "number";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
    }
}

impl Setting for bool {
    const KIND: &'static str = "boolean";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_bool()
    }
}

impl Setting for String {
    const KIND: &'static str = "string";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_str().map(str::to_string)
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| wsdetect::Error::Io { path: path.to_path_buf(), source: e })?;
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| wsdetect::Error::Parse {
                path: path.to_path_buf(),
                line: line_of(&text, e.span().map_or(0, |s| s.start)),
                message: e.message().to_string(),
            })?;
        Ok(Settings {
            table,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lookup(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.table
            .get(section)
            .and_then(|t| t.as_table())
            .and_then(|t| t.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    /// Flag, then file, then `default`; records `key=value` in `manifest`.
    pub fn resolve<T: Setting>(
        &self,
        manifest: &mut Manifest,
        section: &str,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => match self.lookup(section, key) {
                Some(raw) => match T::from_toml(raw) {
                    Some(v) => v,
                    None => bail!(
                        "config {}: {key} must be a {}, found {raw}",
                        self.path.as_deref().unwrap_or(Path::new("?")).display(),
                        T::KIND
                    ),
                },
                None => default,
            },
        };
        manifest.set(key, &value);
        Ok(value)
    }

    /// Like [`resolve`](Self::resolve) without a default.
    pub fn resolve_opt<T: Setting>(
        &self,
        manifest: &mut Manifest,
        section: &str,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.lookup(section, key) {
                Some(raw) => Some(T::from_toml(raw).with_context(|| {
                    format!("config: {key} must be a {}, found {raw}", T::KIND)
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            manifest.set(key, v);
        }
        Ok(value)
    }
}

fn line_of(text: &str, offset: usize) -> u64 {
    text[..offset.min(text.len())].matches('\n').count() as u64 + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(text: &str) -> Settings {
        Settings {
            table: text.parse().unwrap(),
            path: None,
        }
    }

    #[test]
    fn precedence() {
        let s = settings("seed = 3\nepochs = 4\n[train]\nepochs = 7\n");
        let mut m = Manifest::new("test");
        assert_eq!(s.resolve(&mut m, "train", "epochs", Some(9usize), 1).unwrap(), 9);
        assert_eq!(s.resolve(&mut m, "train", "epochs", None, 1usize).unwrap(), 7);
        assert_eq!(s.resolve(&mut m, "other", "epochs", None, 1usize).unwrap(), 4);
        assert_eq!(s.resolve(&mut m, "train", "seed", None, 1u64).unwrap(), 3);
        assert_eq!(s.resolve(&mut m, "train", "lr", None, 0.5f64).unwrap(), 0.5);
        assert_eq!(m.get("epochs"), Some("4"));
    }

    #[test]
    fn integers_widen_to_floats_but_not_back() {
        let s = settings("lr = 1\ndim = 2.5\n");
        let mut m = Manifest::new("test");
        assert_eq!(s.resolve(&mut m, "x", "lr", None, 0.1f64).unwrap(), 1.0);
        assert!(s.resolve(&mut m, "x", "dim", None, 1usize).is_err());
    }
}
