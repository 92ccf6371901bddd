use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Min-max scaler of one column: `x ↦ (x − min)/(max − min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler { min: 0.0, max: 1.0 };

    pub fn fit(column: &str, values: impl IntoIterator<Item = f64>) -> Result<Scaler> {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in values {
            min = min.min(x);
            max = max.max(x);
        }
        if !min.is_finite() {
            return Err(Error::InvalidInput(format!("column `{column}` has no values")));
        }
        if !(max > min) {
            return Err(Error::DegenerateScaler { column: column.to_string(), value: min });
        }
        Ok(Scaler { min, max })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

/// Column names and scalers needed to map raw values to `[0, 1]` and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_columns: Vec<String>,
    pub target_columns: Vec<String>,
    pub inputs: Vec<Scaler>,
    pub targets: Vec<Scaler>,
}

impl Normalization {
    /// Identity scalers with `x1..xI`, `y1..yO` column names.
    pub fn identity(i: usize, o: usize) -> Self {
        Normalization {
            input_columns: (1..=i).map(|k| format!("x{k}")).collect(),
            target_columns: (1..=o).map(|k| format!("y{k}")).collect(),
            inputs: vec![Scaler::IDENTITY; i],
            targets: vec![Scaler::IDENTITY; o],
        }
    }

    pub fn normalize_inputs(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        apply(raw, &self.inputs, Scaler::normalize)
    }

    pub fn normalize_targets(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        apply(raw, &self.targets, Scaler::normalize)
    }

    pub fn denormalize_inputs(&self, scaled: &DMatrix<f64>) -> DMatrix<f64> {
        apply(scaled, &self.inputs, Scaler::denormalize)
    }

    pub fn denormalize_targets(&self, scaled: &DMatrix<f64>) -> DMatrix<f64> {
        apply(scaled, &self.targets, Scaler::denormalize)
    }
}

fn apply(m: &DMatrix<f64>, scalers: &[Scaler], f: fn(&Scaler, f64) -> f64) -> DMatrix<f64> {
    let mut out = m.clone();
    for (c, s) in scalers.iter().enumerate().take(m.ncols()) {
        for r in 0..m.nrows() {
            out[(r, c)] = f(s, m[(r, c)]);
        }
    }
    out
}

/// `K` labeled samples with inputs and targets in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    normalization: Normalization,
    provenance: String,
}

/// Slack allowed on the `[0, 1]` range check to absorb rounding in scalers.
const RANGE_SLACK: f64 = 1e-12;

impl Dataset {
    pub fn new(
        inputs: DMatrix<f64>,
        targets: DMatrix<f64>,
        normalization: Normalization,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidInput("dataset must contain at least one sample".into()));
        }
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "{} input rows but {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        if normalization.inputs.len() != inputs.ncols() || normalization.targets.len() != targets.ncols() {
            return Err(Error::Shape("normalization does not match dataset columns".into()));
        }
        for (name, m) in [("input", &inputs), ("target", &targets)] {
            if let Some(x) = m.iter().find(|x| !(**x >= -RANGE_SLACK && **x <= 1.0 + RANGE_SLACK)) {
                return Err(Error::InvalidInput(format!("{name} value {x} outside [0, 1]")));
            }
        }
        let clamp = |m: DMatrix<f64>| m.map(|x| x.clamp(0.0, 1.0));
        Ok(Dataset {
            inputs: clamp(inputs),
            targets: clamp(targets),
            normalization,
            provenance: provenance.into(),
        })
    }

    /// Dataset whose values are already in `[0, 1]`.
    pub fn unscaled(inputs: DMatrix<f64>, targets: DMatrix<f64>, provenance: impl Into<String>) -> Result<Self> {
        let norm = Normalization::identity(inputs.ncols(), targets.ncols());
        Self::new(inputs, targets, norm, provenance)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn input_row(&self, k: usize) -> Vec<f64> {
        self.inputs.row(k).iter().copied().collect()
    }

    pub fn target_row(&self, k: usize) -> Vec<f64> {
        self.targets.row(k).iter().copied().collect()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Rows `range` as a new dataset sharing the normalization.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.is_empty() {
            return Err(Error::InvalidInput(format!("bad row range {range:?} for {} rows", self.len())));
        }
        let rows = range.len();
        Ok(Dataset {
            inputs: self.inputs.rows(range.start, rows).into_owned(),
            targets: self.targets.rows(range.start, rows).into_owned(),
            normalization: self.normalization.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// First `train` rows and the remainder.
    pub fn split(&self, train: usize) -> Result<(Self, Self)> {
        Ok((self.slice(0..train)?, self.slice(train..self.len())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_round_trip() {
        let s = Scaler::fit("a", [2.0, 6.0, 3.5]).unwrap();
        assert_eq!(s.normalize(2.0), 0.0);
        assert_eq!(s.normalize(6.0), 1.0);
        assert!((s.denormalize(s.normalize(3.5)) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_degenerate() {
        assert!(matches!(Scaler::fit("c", [1.0, 1.0]), Err(Error::DegenerateScaler { .. })));
    }

    #[test]
    fn rejects_out_of_range_values() {
        let x = DMatrix::from_row_slice(1, 1, &[1.5]);
        let y = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(Dataset::unscaled(x, y, "t").is_err());
    }

    #[test]
    fn rejects_empty() {
        assert!(Dataset::unscaled(DMatrix::zeros(0, 1), DMatrix::zeros(0, 1), "t").is_err());
    }
}
