use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error metrics of a batch of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rss: f64,
    pub mse: f64,
    /// `None` when every target column is constant.
    pub nmse: Option<f64>,
    /// Fraction of rows whose prediction lands on the same side of 0.5 as
    /// the target; only for one-column binary targets.
    pub accuracy: Option<f64>,
}

/// `Σ(b − ŷ)² / Σ(b − mean b)²` over all entries.
pub fn nmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let num: f64 = predictions.iter().zip(targets).map(|(p, b)| (b - p) * (b - p)).sum();
    let den: f64 = targets.iter().map(|b| (b - mean) * (b - mean)).sum();
    if den == 0.0 {
        return Err(Error::InvalidInput("NMSE of a constant target is undefined".into()));
    }
    Ok(num / den)
}

/// RSS, MSE (`RSS/K`), NMSE and, for one binary column, accuracy.
pub fn metrics(predictions: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Metrics> {
    if predictions.shape() != targets.shape() {
        return Err(Error::Shape(format!(
            "predictions are {:?}, targets are {:?}",
            predictions.shape(),
            targets.shape()
        )));
    }
    let k = targets.nrows();
    if k == 0 {
        return Err(Error::InvalidInput("metrics of an empty batch".into()));
    }
    let rss: f64 = (targets - predictions).iter().map(|e| e * e).sum();
    let nmse = {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in 0..targets.ncols() {
            let col = targets.column(c);
            let mean = col.mean();
            den += col.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>();
            num += col.iter().zip(predictions.column(c).iter()).map(|(b, p)| (b - p) * (b - p)).sum::<f64>();
        }
        (den > 0.0).then(|| num / den)
    };
    let binary = targets.ncols() == 1 && targets.iter().all(|&b| b == 0.0 || b == 1.0);
    let accuracy = binary.then(|| {
        let hits = targets
            .iter()
            .zip(predictions.iter())
            .filter(|(b, p)| (**p > 0.5) == (**b > 0.5))
            .count();
        hits as f64 / k as f64
    });
    Ok(Metrics { rss, mse: rss / k as f64, nmse, accuracy })
}
