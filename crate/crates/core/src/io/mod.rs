//! File formats, manifests, configuration, reports and seeding.

pub mod config;
pub mod manifest;
pub mod params;
pub mod report;
pub mod seed;
pub mod trajectory;

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

pub use config::{load_config, ExperimentConfig};
pub use manifest::{load_dataset, load_manifest, save_dataset, DatasetManifest};
pub use params::{load_params, save_params};
pub use trajectory::{load_trajectory, save_trajectory};

/// `version` written to and required in every JSON file.
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Deserializes JSON, reporting failures with the path to the offending field.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "(root)".to_string() } else { field };
        Error::Schema {
            path: format!("{}: {field}", origin.display()),
            message: e.into_inner().to_string(),
        }
    })
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
