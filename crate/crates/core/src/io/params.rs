//! Contact parameter files: `{"version": 1, "theta": [...]}`.
//!
//! `theta` is flat: vertex 0 `x, y, z`, vertex 1 `x, y, z`, ..., vertex 7
//! `x, y, z` (body frame, m), then the friction coefficient.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{atomic_write, parse_json, read_text, FORMAT_VERSION};
use crate::contact_model::{ContactParams, MU_INDEX, PARAM_DIM};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    version: u32,
    theta: Vec<f64>,
}

pub fn params_to_json(params: &ContactParams) -> String {
    let file = ParamsFile {
        version: FORMAT_VERSION,
        theta: params.to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

pub fn parse_params(text: &str, origin: &Path) -> Result<ContactParams> {
    let file: ParamsFile = parse_json(text, origin)?;
    let schema = |path: String, message: String| Error::Schema {
        path: format!("{}: {path}", origin.display()),
        message,
    };
    if file.version != FORMAT_VERSION {
        return Err(schema("version".into(), format!("unsupported version {}", file.version)));
    }
    if file.theta.len() != PARAM_DIM {
        return Err(schema(
            "theta".into(),
            format!("expected {PARAM_DIM} values, found {}", file.theta.len()),
        ));
    }
    if let Some(i) = file.theta.iter().position(|x| !x.is_finite()) {
        return Err(schema(format!("theta[{i}]"), "non-finite value".into()));
    }
    if file.theta[MU_INDEX] < 0.0 {
        return Err(schema(
            format!("theta[{MU_INDEX}]"),
            format!("friction coefficient mu must be >= 0, got {}", file.theta[MU_INDEX]),
        ));
    }
    ContactParams::from_slice(&file.theta)
}

pub fn save_params(params: &ContactParams, path: &Path) -> Result<()> {
    atomic_write(path, params_to_json(params).as_bytes())
}

pub fn load_params(path: &Path) -> Result<ContactParams> {
    parse_params(&read_text(path)?, path)
}
