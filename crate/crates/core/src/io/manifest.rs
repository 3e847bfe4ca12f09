//! Dataset manifests: a JSON index of trajectory CSV files plus the known
//! physical constants they were recorded with.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectory::{load_trajectory_as, save_trajectory};
use super::{atomic_write, parse_json, read_text, FORMAT_VERSION};
use crate::dynamics::{MassProps, Physics, Trajectory, TrajectorySource};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative paths resolve against the manifest's directory.
    pub file: PathBuf,
    pub dt: f64,
    /// Number of states.
    #[serde(rename = "T")]
    pub steps: usize,
    pub source: TrajectorySource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub trajectories: Vec<ManifestEntry>,
    pub mass_props: MassProps,
    pub gravity: f64,
    #[serde(default)]
    pub notes: String,
}

impl DatasetManifest {
    pub fn physics(&self) -> Physics {
        Physics {
            mass: self.mass_props,
            gravity: self.gravity,
        }
    }

    /// Version, id uniqueness and numeric ranges; file existence is checked
    /// by [`load_manifest`].
    pub fn validate(&self) -> Result<()> {
        let schema = |path: String, message: String| Err(Error::Schema { path, message });
        if self.version != FORMAT_VERSION {
            return schema("version".into(), format!("unsupported version {}", self.version));
        }
        self.mass_props.validate()?;
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return schema("gravity".into(), "must be finite and >= 0".into());
        }
        let mut seen = HashSet::new();
        for (i, e) in self.trajectories.iter().enumerate() {
            if !seen.insert(e.id.as_str()) {
                return schema(format!("trajectories[{i}].id"), format!("duplicate id {:?}", e.id));
            }
            if !(e.dt > 0.0 && e.dt.is_finite()) {
                return schema(format!("trajectories[{i}].dt"), "must be positive".into());
            }
            if e.steps < 2 {
                return schema(format!("trajectories[{i}].T"), "must be at least 2".into());
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.join(file)
    }
}

fn base_dir(manifest_path: &Path) -> &Path {
    manifest_path.parent().unwrap_or(Path::new("."))
}

/// Parses and validates a manifest; every referenced file must exist.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = parse_json(&read_text(path)?, path)?;
    manifest.validate().map_err(|e| match e {
        Error::Schema { path: field, message } => Error::Schema {
            path: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })?;
    let base = base_dir(path);
    let missing: Vec<&str> = manifest
        .trajectories
        .iter()
        .filter(|e| !resolve(base, &e.file).is_file())
        .map(|e| e.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::format(
            path,
            format!("missing trajectory files for ids: {}", missing.join(", ")),
        ));
    }
    Ok(manifest)
}

/// Loads a manifest and all of its trajectories, checking each file against
/// its entry.
pub fn load_dataset(path: &Path) -> Result<(DatasetManifest, Vec<Trajectory>)> {
    let manifest = load_manifest(path)?;
    let base = base_dir(path);
    let mut out = Vec::with_capacity(manifest.trajectories.len());
    for e in &manifest.trajectories {
        let file = resolve(base, &e.file);
        let mut traj = load_trajectory_as(&e.id, &file)?;
        if (traj.dt - e.dt).abs() > super::trajectory::TIMESTAMP_TOLERANCE {
            return Err(Error::format(&file, format!("dt {} differs from manifest dt {} for {}", traj.dt, e.dt, e.id)));
        }
        if traj.len() != e.steps {
            return Err(Error::format(&file, format!("{} rows, manifest says T = {} for {}", traj.len(), e.steps, e.id)));
        }
        traj.dt = e.dt;
        traj.source = e.source;
        out.push(traj);
    }
    Ok((manifest, out))
}

/// Writes `<id>.csv` for every trajectory and `manifest.json` into `dir`;
/// returns the manifest path.
pub fn save_dataset(trajectories: &[Trajectory], dir: &Path, physics: &Physics, notes: &str) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        let file = PathBuf::from(format!("{}.csv", t.id));
        save_trajectory(t, &dir.join(&file))?;
        entries.push(ManifestEntry {
            id: t.id.clone(),
            file,
            dt: t.dt,
            steps: t.len(),
            source: t.source,
        });
    }
    let manifest = DatasetManifest {
        version: FORMAT_VERSION,
        trajectories: entries,
        mass_props: physics.mass,
        gravity: physics.gravity,
        notes: notes.to_string(),
    };
    manifest.validate()?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact_model::ContactParams;
    use crate::synth::{mixed_dataset, SimSettings};

    fn small() -> Vec<Trajectory> {
        let sim = SimSettings { horizon: 30, ..Default::default() };
        mixed_dataset(3, &ContactParams::cube(0.05, 0.3), &sim, 2).unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = small();
        let path = save_dataset(&data, dir.path(), &Physics::default(), "unit test").unwrap();
        let (manifest, back) = load_dataset(&path).unwrap();
        assert_eq!(manifest.trajectories.len(), 3);
        assert_eq!(manifest.physics(), Physics::default());
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.states, b.states);
            assert_eq!(b.source, TrajectorySource::Simulated);
        }
    }

    #[test]
    fn missing_file_lists_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(&small(), dir.path(), &Physics::default(), "").unwrap();
        std::fs::remove_file(dir.path().join("toss001.csv")).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("toss001") && !err.contains("toss000"), "{err}");
    }

    #[test]
    fn strict_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(&small(), dir.path(), &Physics::default(), "").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        let dup = text.replace("\"toss001\"", "\"toss000\"");
        std::fs::write(&path, dup).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("trajectories[1].id"), "{err}");

        let extra = text.replacen("\"notes\"", "\"colour\": 1, \"notes\"", 1);
        std::fs::write(&path, extra).unwrap();
        assert!(load_manifest(&path).unwrap_err().to_string().contains("colour"));

        let versionless = text.replacen("\"version\": 1,", "", 1);
        std::fs::write(&path, versionless).unwrap();
        assert!(load_manifest(&path).unwrap_err().to_string().contains("version"));

        let bad_dt = text.replacen("\"dt\": 0.005", "\"dt\": \"fast\"", 1);
        std::fs::write(&path, bad_dt).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("trajectories[0].dt"), "{err}");
    }
}
