//! Run manifests: flat `key=value` text recording the command, its
//! effective settings, and SHA-256 digests of every input and output.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::Result;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| wsdetect::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest { entries: Vec::new() };
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = escape(&value.to_string());
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Records `path` and its digest under `input.<name>`.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.set(&format!("input.{name}"), path.display());
        let digest = file_sha256(path)?;
        self.set(&format!("input.{name}.sha256"), digest);
        Ok(())
    }

    /// Records an already written file under `output.<name>`.
    pub fn output(&mut self, name: &str, path: &Path) -> Result<()> {
        self.set(&format!("output.{name}"), path.display());
        let digest = file_sha256(path)?;
        self.set(&format!("output.{name}.sha256"), digest);
        Ok(())
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| wsdetect::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }
}
