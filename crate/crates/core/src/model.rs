//! Versioned JSON model files.
//!
//! Matrices are stored row-major as nested arrays. Floats are written in
//! the shortest form that parses back to the identical `f64`, so a save
//! and load round trip is lossless.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Role};

pub const MODEL_VERSION: u32 = 1;

/// Description of the flat weight order, recorded in every model file.
pub const WEIGHT_ORDER: &str = "w_plus over edges in row-major order, then w_minus in the same order";

/// On-disk form of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub kind: String,
    pub n: usize,
    pub roles: Vec<Role>,
    pub edges: Vec<(usize, usize)>,
    pub w_plus: Vec<Vec<f64>>,
    pub w_minus: Vec<Vec<f64>>,
    /// Service rate of each output neuron, `null` for derived rates.
    pub r_output: Vec<Option<f64>>,
    pub lambda_plus_defaults: Vec<f64>,
    pub lambda_minus_defaults: Vec<f64>,
    pub controlled: bool,
    pub weight_order: String,
    pub normalization: Option<Normalization>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("{name} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_spec(spec: &NetworkSpec, normalization: Option<Normalization>) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            kind: "rnn".into(),
            n: spec.n(),
            roles: spec.roles().to_vec(),
            edges: spec.edges().to_vec(),
            w_plus: rows(spec.w_plus()),
            w_minus: rows(spec.w_minus()),
            r_output: (0..spec.n())
                .map(|i| spec.roles()[i].is_output().then(|| spec.rates()[i]))
                .collect(),
            lambda_plus_defaults: spec.lambda_plus().iter().copied().collect(),
            lambda_minus_defaults: spec.lambda_minus().iter().copied().collect(),
            controlled: spec.controlled(),
            weight_order: WEIGHT_ORDER.into(),
            normalization,
        }
    }

    pub fn to_spec(&self) -> Result<NetworkSpec> {
        if self.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                self.version
            )));
        }
        if self.kind != "rnn" {
            return Err(Error::InvalidInput(format!("unsupported model kind `{}`", self.kind)));
        }
        let n = self.n;
        if self.roles.len() != n
            || self.r_output.len() != n
            || self.lambda_plus_defaults.len() != n
            || self.lambda_minus_defaults.len() != n
        {
            return Err(Error::Shape(format!("per-neuron vectors must have length {n}")));
        }
        let rates = DVector::from_fn(n, |i, _| self.r_output[i].unwrap_or(1.0));
        for (i, role) in self.roles.iter().enumerate() {
            if role.is_output() && self.r_output[i].is_none() {
                return Err(Error::InvalidInput(format!("output neuron {i} has no rate")));
            }
        }
        let mut spec = NetworkSpec::from_parts(
            self.roles.clone(),
            self.edges.clone(),
            matrix("w_plus", n, &self.w_plus)?,
            matrix("w_minus", n, &self.w_minus)?,
            rates,
            DVector::from_vec(self.lambda_plus_defaults.clone()),
            DVector::from_vec(self.lambda_minus_defaults.clone()),
        )?;
        spec.set_controlled(self.controlled);
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("model file: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut spec = NetworkSpec::layered(&[2, 3, 2], 1.7, || rng.random::<f64>() / 3.0).unwrap();
        spec.set_lambda_minus(3, 0.1 / 3.0).unwrap();
        let file = ModelFile::from_spec(&spec, Some(Normalization::identity(2, 2)));
        let back = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_spec().unwrap(), spec);
    }

    #[test]
    fn rejects_other_versions() {
        let spec = NetworkSpec::layered(&[1, 1], 1.0, || 0.5).unwrap();
        let mut file = ModelFile::from_spec(&spec, None);
        file.version = 99;
        assert!(file.to_spec().is_err());
    }
}
