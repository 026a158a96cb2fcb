use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::config::JobConfig;
use crate::jobs::Artifact;

/// Write `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Write the requested formats; returns the paths written.
pub fn emit(cfg: &JobConfig, artifact: &Artifact) -> std::io::Result<Vec<PathBuf>> {
    let resolved = serde_json::to_value(cfg).expect("config serializes");
    let mut written = Vec::new();
    if cfg.format.csv() {
        let path = PathBuf::from(format!("{}.csv", cfg.output));
        let body = format!(
            "# mvsde {}\n# config {}\n{}",
            mvsde::VERSION,
            serde_json::to_string(&resolved).expect("config serializes"),
            artifact.csv
        );
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    if cfg.format.json() {
        let path = PathBuf::from(format!("{}.json", cfg.output));
        let doc: Value = json!({
            "version": mvsde::VERSION,
            "config": resolved,
            "result": artifact.json,
        });
        let mut body = serde_json::to_string_pretty(&doc).expect("result serializes");
        body.push('\n');
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
