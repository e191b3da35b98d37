//! Flat-file persistence under the data directory.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

pub const SESSIONS: &str = "sessions";
pub const MODELS: &str = "models";
pub const LAYOUTS: &str = "layouts";
pub const TRIALS: &str = "trials";
pub const CORPORA: &str = "corpora";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> anyhow::Result<Store> {
        let root = root.into();
        for dir in [SESSIONS, MODELS, LAYOUTS, TRIALS, CORPORA] {
            fs::create_dir_all(root.join(dir)).with_context(|| format!("creating {}", root.join(dir).display()))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, dir: &str, id: &str, ext: &str) -> PathBuf {
        self.root.join(dir).join(format!("{id}.{ext}"))
    }

    /// Ids of every `*.{ext}` file in `dir`, sorted.
    pub fn list(&self, dir: &str, ext: &str) -> anyhow::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join(dir))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == ext) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Appends one line and flushes it to disk before returning.
    pub fn append_line(&self, dir: &str, id: &str, line: &str) -> std::io::Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(dir, id, "ndjson"))?;
        f.write_all(line.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_data()
    }

    /// Writes a whole file via a temporary sibling and rename.
    pub fn write_atomic(&self, dir: &str, id: &str, ext: &str, contents: &str) -> std::io::Result<()> {
        let path = self.path(dir, id, ext);
        let tmp = path.with_extension(format!("{ext}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(contents.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }

    pub fn read(&self, dir: &str, id: &str, ext: &str) -> std::io::Result<String> {
        fs::read_to_string(self.path(dir, id, ext))
    }
}

/// Next free id of the form `{prefix}{n:06}` given the existing ones.
pub fn next_id(prefix: &str, existing: &[String]) -> u64 {
    existing
        .iter()
        .filter_map(|id| id.strip_prefix(prefix)?.parse::<u64>().ok())
        .max()
        .map_or(1, |n| n + 1)
}

/// Ids come from clients in URLs; keep them to a safe file-name alphabet.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
