use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::model::GeoResolution;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    key: String,
    stored_at: u64,
    resolution: GeoResolution,
}

/// Geocoding results keyed by normalized query and constraint.
///
/// With a backing file, entries are appended as JSON lines and reloaded on
/// open; the last line for a key wins. Entries older than the TTL are
/// ignored. Transport failures are never cached.
pub struct GeoCache {
    ttl: Option<Duration>,
    file: Option<PathBuf>,
    entries: Mutex<HashMap<String, Entry>>,
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl GeoCache {
    pub fn in_memory() -> Self {
        GeoCache {
            ttl: None,
            file: None,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// Opens (or creates) a cache file. Unparseable lines, such as a torn
    /// final write, are skipped.
    pub fn open(path: impl AsRef<Path>, ttl: Option<Duration>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        match File::open(&path) {
            Ok(f) => {
                for line in BufReader::new(f).lines() {
                    let line = line?;
                    match serde_json::from_str::<Entry>(&line) {
                        Ok(e) => {
                            entries.insert(e.key.clone(), e);
                        }
                        Err(_) if line.trim().is_empty() => {}
                        Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping bad cache line"),
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            Err(e) => return Err(e),
        }
        Ok(GeoCache {
            ttl,
            file: Some(path),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<GeoResolution> {
        self.get_at(key, now_secs())
    }

    pub fn get_at(&self, key: &str, now: u64) -> Option<GeoResolution> {
        let entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let e = entries.get(key)?;
        if let Some(ttl) = self.ttl {
            if now.saturating_sub(e.stored_at) > ttl.as_secs() {
                return None;
            }
        }
        Some(e.resolution.clone())
    }

    pub fn put(&self, key: &str, resolution: &GeoResolution) {
        self.put_at(key, resolution, now_secs())
    }

    pub fn put_at(&self, key: &str, resolution: &GeoResolution, now: u64) {
        let entry = Entry {
            key: key.to_string(),
            stored_at: now,
            resolution: resolution.clone(),
        };
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(path) = &self.file {
            if let Err(e) = append_line(path, &entry) {
                tracing::warn!(path = %path.display(), error = %e, "geo cache write failed");
            }
        }
        entries.insert(entry.key.clone(), entry);
    }
}

fn append_line(path: &Path, entry: &Entry) -> io::Result<()> {
    let mut line = serde_json::to_string(entry).map_err(io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())
}
