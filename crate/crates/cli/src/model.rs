//! Model files written by `train` and read by `eval` and `predict`.

use std::fs;
use std::path::Path;

use gnet_core::data::Scaler;
use gnet_core::esqn::EsqnModel;
use gnet_core::model::ModelFile;
use gnet_core::network::NetworkSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const ESQN_VERSION: u32 = 1;

/// A fitted ESQN with the windowing and scaling of its training series.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsqnFile {
    pub version: u32,
    pub kind: String,
    pub lag: usize,
    pub horizon: usize,
    /// Series column name used when reading CSV data.
    pub column: String,
    pub scaler: Scaler,
    pub model: EsqnModel,
}

impl EsqnFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("esqn model serializes")
    }
}

pub enum LoadedModel {
    Rnn(Box<ModelFile>, NetworkSpec),
    Esqn(Box<EsqnFile>),
}

/// Reads either model kind. Unreadable or malformed files are usage
/// errors.
pub fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read model {}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::usage(format!("model {}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("rnn") => {
            let file = ModelFile::from_json(&text).map_err(|e| bad(&e))?;
            let spec = file.to_spec().map_err(|e| bad(&e))?;
            Ok(LoadedModel::Rnn(Box::new(file), spec))
        }
        Some("esqn") => {
            let file: EsqnFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
            if file.version != ESQN_VERSION {
                return Err(bad(&format!("unsupported esqn model version {}", file.version)));
            }
            if file.model.n_inputs() != file.lag || file.model.readout().is_none() {
                return Err(bad(&"esqn model does not match its lag or has no readout"));
            }
            Ok(LoadedModel::Esqn(Box::new(file)))
        }
        other => Err(bad(&format!("unknown model kind {other:?}"))),
    }
}
