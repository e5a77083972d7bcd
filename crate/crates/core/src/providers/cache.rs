//! Content-addressed replay cache: one JSON file per entry under
//! `<root>/<provider>/<digest>.json`, plus JSONL export/import for moving
//! caches between machines.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CacheKey, ProviderError};
use crate::util::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub provider: String,
    pub digest: String,
    pub request: serde_json::Value,
    pub response: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ImportStats {
    pub imported: usize,
    pub skipped: usize,
}

#[derive(Debug)]
pub struct ReplayCache {
    root: PathBuf,
}

impl ReplayCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ReplayCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, provider: &str, digest: &str) -> PathBuf {
        self.root.join(provider).join(format!("{digest}.json"))
    }

    /// Look up an entry. A corrupt file counts as a miss so one bad write
    /// can never wedge a run.
    pub fn get(&self, provider: &str, key: &CacheKey) -> Result<Option<CacheEntry>, ProviderError> {
        let path = self.entry_path(provider, key.digest());
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ProviderError::Cache(format!("{}: {e}", path.display()))),
        };
        Ok(serde_json::from_str(&text).ok())
    }

    /// Store an entry atomically (temp file + rename), so concurrent writers
    /// of the same key cannot interleave and readers never observe a partial
    /// file.
    pub fn put(
        &self,
        provider: &str,
        key: &CacheKey,
        request: serde_json::Value,
        response: serde_json::Value,
    ) -> Result<(), ProviderError> {
        let entry = CacheEntry {
            provider: provider.to_string(),
            digest: key.digest().to_string(),
            request,
            response,
        };
        let path = self.entry_path(provider, key.digest());
        let bytes = serde_json::to_vec(&entry)
            .map_err(|e| ProviderError::Cache(format!("serialize: {e}")))?;
        write_atomic(&path, &bytes)
            .map_err(|e| ProviderError::Cache(format!("{}: {e}", path.display())))
    }

    /// Write every entry as one JSON line, sorted by (provider, digest) so
    /// exports of identical caches are byte-identical. Returns the entry
    /// count; unreadable entries are skipped with a warning on stderr.
    pub fn export(&self, path: &Path) -> Result<usize, ProviderError> {
        let mut entries: Vec<(String, String)> = Vec::new(); // (provider, digest)
        if self.root.exists() {
            let providers = fs::read_dir(&self.root)
                .map_err(|e| ProviderError::Cache(format!("{}: {e}", self.root.display())))?;
            for provider_dir in providers {
                let provider_dir =
                    provider_dir.map_err(|e| ProviderError::Cache(e.to_string()))?;
                if !provider_dir.path().is_dir() {
                    continue;
                }
                let provider = provider_dir.file_name().to_string_lossy().into_owned();
                let files = fs::read_dir(provider_dir.path())
                    .map_err(|e| ProviderError::Cache(e.to_string()))?;
                for file in files {
                    let file = file.map_err(|e| ProviderError::Cache(e.to_string()))?;
                    let name = file.file_name().to_string_lossy().into_owned();
                    if let Some(digest) = name.strip_suffix(".json") {
                        entries.push((provider.clone(), digest.to_string()));
                    }
                }
            }
        }
        entries.sort();

        let mut buf = Vec::new();
        let mut count = 0;
        for (provider, digest) in entries {
            let entry_path = self.entry_path(&provider, &digest);
            let text = match fs::read_to_string(&entry_path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("warning: skipping {}: {e}", entry_path.display());
                    continue;
                }
            };
            match serde_json::from_str::<CacheEntry>(&text) {
                Ok(entry) => {
                    serde_json::to_writer(&mut buf, &entry)
                        .map_err(|e| ProviderError::Cache(e.to_string()))?;
                    buf.push(b'\n');
                    count += 1;
                }
                Err(e) => eprintln!("warning: skipping corrupt {}: {e}", entry_path.display()),
            }
        }
        write_atomic(path, &buf)
            .map_err(|e| ProviderError::Cache(format!("{}: {e}", path.display())))?;
        Ok(count)
    }

    /// Merge entries from a JSONL export. Last writer wins on key collision;
    /// corrupt lines are skipped, counted, and warned about.
    pub fn import(&self, path: &Path) -> Result<ImportStats, ProviderError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ProviderError::Cache(format!("{}: {e}", path.display())))?;
        let mut stats = ImportStats::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = match serde_json::from_str(line) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("warning: {}:{}: skipping corrupt entry: {e}", path.display(), lineno + 1);
                    stats.skipped += 1;
                    continue;
                }
            };
            let dest = self.entry_path(&entry.provider, &entry.digest);
            let bytes = serde_json::to_vec(&entry)
                .map_err(|e| ProviderError::Cache(e.to_string()))?;
            write_atomic(&dest, &bytes)
                .map_err(|e| ProviderError::Cache(format!("{}: {e}", dest.display())))?;
            stats.imported += 1;
        }
        Ok(stats)
    }

    /// Total entries currently stored, across all providers.
    pub fn len(&self) -> usize {
        let mut count = 0;
        if let Ok(providers) = fs::read_dir(&self.root) {
            for provider in providers.flatten() {
                if let Ok(files) = fs::read_dir(provider.path()) {
                    count += files
                        .flatten()
                        .filter(|f| f.file_name().to_string_lossy().ends_with(".json"))
                        .count();
                }
            }
        }
        count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
