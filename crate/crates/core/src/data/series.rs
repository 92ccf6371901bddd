use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{Dataset, Normalization, Scaler};
use crate::error::{Error, Result};

/// Lagged windows of a scalar series: row `t` has inputs
/// `x_(t−p+1) … x_t` and target `x_(t+h)`.
///
/// The series is min-max normalized as a whole first, so every input and
/// the target share one scaler.
pub fn window_series(series: &[f64], p: usize, h: usize) -> Result<Dataset> {
    if p == 0 || h == 0 {
        return Err(Error::InvalidInput("lag and horizon must be >= 1".into()));
    }
    if series.len() < p + h {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for lag {p} and horizon {h}",
            series.len()
        )));
    }
    let scaler = Scaler::fit("series", series.iter().copied())?;
    let scaled: Vec<f64> = series.iter().map(|&x| scaler.normalize(x)).collect();
    let rows = series.len() - p - h + 1;
    let x = DMatrix::from_fn(rows, p, |r, c| scaled[r + c]);
    let y = DMatrix::from_fn(rows, 1, |r, _| scaled[r + p - 1 + h]);
    let norm = Normalization {
        input_columns: (1..=p).map(|k| format!("lag{}", p - k)).collect(),
        target_columns: vec![format!("ahead{h}")],
        inputs: vec![scaler; p],
        targets: vec![scaler],
    };
    Dataset::new(x, y, norm, format!("window(p={p}, h={h})"))
}

/// Frequency-modulated sine with additive Gaussian noise, kept inside
/// `(0, 1)`: `0.5 + 0.4·sin(2πt/25 + 1.5·sin(2πt/97)) + ε`.
///
/// The modulation keeps a fixed-order linear autoregression from being an
/// exact model of the series.
pub fn fm_sine_series(len: usize, noise: f64, seed: u64) -> Vec<f64> {
    use std::f64::consts::TAU;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = Normal::new(0.0, noise.max(0.0)).expect("finite std");
    (0..len)
        .map(|t| {
            let t = t as f64;
            let x = 0.5 + 0.4 * (TAU * t / 25.0 + 1.5 * (TAU * t / 97.0).sin()).sin();
            (x + eps.sample(&mut rng)).clamp(0.0, 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_by_definition() {
        let ds = window_series(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap();
        assert_eq!(ds.len(), 2);
        let raw_x = ds.normalization().denormalize_inputs(ds.inputs());
        let raw_y = ds.normalization().denormalize_targets(ds.targets());
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(raw_x[(0, 0)], 1.0) && close(raw_x[(0, 1)], 2.0) && close(raw_y[(0, 0)], 3.0));
        assert!(close(raw_x[(1, 0)], 2.0) && close(raw_x[(1, 1)], 3.0) && close(raw_y[(1, 0)], 4.0));
    }

    #[test]
    fn guards() {
        assert!(window_series(&[1.0, 2.0, 3.0], 3, 1).is_err());
        assert!(matches!(window_series(&[2.0; 10], 2, 1), Err(Error::DegenerateScaler { .. })));
    }

    #[test]
    fn series_is_seeded() {
        assert_eq!(fm_sine_series(50, 0.01, 3), fm_sine_series(50, 0.01, 3));
        assert_ne!(fm_sine_series(50, 0.01, 3), fm_sine_series(50, 0.01, 4));
        assert!(fm_sine_series(500, 0.05, 1).iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
