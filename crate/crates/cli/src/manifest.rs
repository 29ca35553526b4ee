use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

/// Everything needed to reproduce a run, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
    /// Not part of the recorded line.
    pub dry_run: bool,
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").expect("writing to a string");
    }
    s
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = Manifest::default();
        m.set("subcommand", subcommand);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    /// Records a path and the checksum of its current contents.
    pub fn input(&mut self, key: &str, path: &Path) -> std::io::Result<()> {
        self.set(key, path.display());
        self.set(&format!("{key}_sha256"), sha256_file(path)?);
        Ok(())
    }

    /// `key=value` pairs separated by spaces; values with spaces are quoted.
    pub fn line(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| {
                if v.is_empty() || v.contains([' ', '"', '=']) {
                    format!("{k}={v:?}")
                } else {
                    format!("{k}={v}")
                }
            })
            .collect();
        format!("manifest: {}", parts.join(" "))
    }
}
