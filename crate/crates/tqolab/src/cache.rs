//! On-disk cache of low spectra keyed by a digest of the inputs.
//!
//! Enabled when the [`crate::CACHE_ENV`] variable names a directory. Values
//! round-trip exactly through JSON, so cached and fresh runs agree bit for bit.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn from_env() -> Cache {
        Cache {
            dir: std::env::var_os(crate::CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        }
    }

    pub fn disabled() -> Cache {
        Cache { dir: None }
    }

    pub fn dir(&self) -> Option<&PathBuf> {
        self.dir.as_ref()
    }

    pub fn key(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get(&self, key: &str) -> Option<Vec<f64>> {
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let text = std::fs::read_to_string(path).ok()?;
        let e: Entry = serde_json::from_str(&text).ok()?;
        (e.key == key).then_some(e.values)
    }

    /// Best effort: a failed write only loses the cache entry.
    pub fn put(&self, key: &str, values: &[f64]) {
        if let Some(d) = &self.dir {
            let e = Entry {
                key: key.to_string(),
                values: values.to_vec(),
            };
            if let Ok(s) = serde_json::to_string(&e) {
                let _ = write_atomic(&d.join(format!("{key}.json")), s.as_bytes());
            }
        }
    }
}
