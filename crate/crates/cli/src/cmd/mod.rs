pub mod crop;
pub mod diffuse;
pub mod ingest;
pub mod losses;
pub mod metrics;
pub mod scaling;

use std::path::Path;

use xtal_core::canonical::from_canonical_json;
use xtal_core::crystal::Crystal;

use crate::outcome::Failure;

pub(crate) fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", crate::io::file_name(path)))
}

pub(crate) fn load_crystal(path: &Path) -> Result<Crystal, String> {
    from_canonical_json(&read_text(path)?).map_err(|e| e.to_string())
}

pub(crate) fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}
