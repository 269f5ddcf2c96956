pub mod calibrate;
pub mod estimate;
pub mod price;
pub mod report;
pub mod simulate;

use std::path::Path;

use mvswap::calibrate::ModelParams;
use mvswap::params::CorrelationMatrix;
use serde::{Deserialize, Serialize};

use crate::failure::{CmdResult, Failure};
use crate::files;

/// Model parameters plus the correlation matrix of the Brownian drivers.
///
/// ```json
/// {"model": "heston", "assets": [...], "corr": [[1, 0.2], [0.2, 1]]}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub params: ModelParams,
    pub corr: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn correlation(&self) -> CmdResult<CorrelationMatrix<f64>> {
        let c = CorrelationMatrix::from_rows(&self.corr)?;
        if c.n() != self.params.n_assets() {
            return Err(Failure::validation(format!(
                "corr is {0}x{0} but the model has {1} assets",
                c.n(),
                self.params.n_assets()
            )));
        }
        Ok(c)
    }
}

/// Reads a JSON config, recording its hash in the manifest.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path, manifest: &mut files::RunManifest) -> CmdResult<T> {
    let bytes = files::read_bytes(path)?;
    manifest.config(path, &bytes);
    serde_json::from_slice(&bytes).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

pub fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

/// Shortest round-trip representation, so CSV output is stable.
pub fn num(v: f64) -> String {
    format!("{v}")
}
