use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Provider responses keyed by `"<provider kind>:<image content hash>"`.
///
/// Writes are serialized through a mutex. Persisted as one sorted JSON
/// object so that identical contents produce identical bytes.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: Mutex<BTreeMap<String, serde_json::Value>>,
}

impl ResponseCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> io::Result<Self> {
        match fs::read(path) {
            Ok(bytes) => {
                let entries: BTreeMap<String, serde_json::Value> = serde_json::from_slice(&bytes)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
                Ok(Self {
                    entries: Mutex::new(entries),
                })
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let entries = self.entries.lock().expect("cache poisoned");
        let mut bytes = serde_json::to_vec_pretty(&*entries)?;
        bytes.push(b'\n');
        fs::write(path, bytes)
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let entries = self.entries.lock().expect("cache poisoned");
        entries
            .get(key)
            .and_then(|v| serde_json::from_value(v.clone()).ok())
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) {
        if let Ok(v) = serde_json::to_value(value) {
            self.entries
                .lock()
                .expect("cache poisoned")
                .insert(key.to_string(), v);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
