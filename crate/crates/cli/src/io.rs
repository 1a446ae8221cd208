//! Input discovery and the ordered output sink.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::outcome::Failure;

/// Expands the given paths into files: plain files are kept as given,
/// directories contribute their entries with a matching extension in name
/// order.
pub fn gather(paths: &[PathBuf], extensions: &[&str]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && has_extension(f, extensions))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn has_extension(path: &Path, extensions: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

pub fn is_json(path: &Path) -> bool {
    has_extension(path, &["json"])
}

/// File name without directories, so outputs do not depend on where the
/// inputs live.
pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| file_name(path), |n| n.to_string_lossy().into_owned())
}

/// The effective configuration as echoed into every artifact.
pub fn echo(command: &str, seed: u64, params: &impl Serialize) -> Value {
    json!({ "command": command, "seed": seed, "params": params })
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serialises");
    s.push('\n');
    s
}

/// Leading comment line carrying the configuration in CSV outputs.
pub fn csv_comment(config: &Value) -> String {
    format!("# config {config}\n")
}

/// Writes files under the output directory one after another, in the order
/// they are handed over.
pub struct Sink {
    root: PathBuf,
}

impl Sink {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root).map_err(|e| Failure::Internal(format!("{}: {e}", root.display())))?;
        Ok(Sink { root: root.to_path_buf() })
    }

    pub fn write(&self, relative: impl AsRef<Path>, contents: &str) -> Result<(), Failure> {
        let path = self.root.join(relative);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, contents).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
    }
}
