use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Output directory; relative paths are created on demand.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| CliError::Io { path: root.display().to_string(), source })?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.root.join(rel);
        let io = |source| CliError::Io { path: path.display().to_string(), source };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        fs::write(&path, contents).map_err(io)?;
        Ok(path)
    }

    pub fn write_json(&self, rel: impl AsRef<Path>, value: &impl serde::Serialize) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(rel, text)
    }
}
