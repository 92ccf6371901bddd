use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Synthetic benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    Xor,
    /// `n`-bit parity, `1 ≤ n ≤ 10`.
    Parity { n: usize },
    /// `samples` points `t ~ U[0, 1]` with target `(sin 2πt + 1)/2`.
    Sine { samples: usize },
}

/// Generates the dataset of a task. Only `Sine` consumes the seed.
pub fn gen_task(task: Task, seed: u64) -> Result<Dataset> {
    match task {
        Task::Xor => parity(2, "xor"),
        Task::Parity { n } => {
            if !(1..=10).contains(&n) {
                return Err(Error::InvalidInput(format!("parity size must be in 1..=10, got {n}")));
            }
            parity(n, &format!("parity({n})"))
        }
        Task::Sine { samples } => {
            if samples < 2 {
                return Err(Error::InvalidInput(format!("sine needs at least 2 samples, got {samples}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..samples).map(|_| rng.random::<f64>()).collect();
            let x = DMatrix::from_column_slice(samples, 1, &t);
            let y = x.map(sine_target);
            Dataset::unscaled(x, y, format!("sine({samples}, seed={seed})"))
        }
    }
}

fn sine_target(t: f64) -> f64 {
    ((std::f64::consts::TAU * t).sin() + 1.0) / 2.0
}

/// All `2ⁿ` bit patterns in counting order, first input = most significant
/// bit, target = XOR of the bits.
fn parity(n: usize, name: &str) -> Result<Dataset> {
    let k = 1usize << n;
    let x = DMatrix::from_fn(k, n, |r, c| ((r >> (n - 1 - c)) & 1) as f64);
    let y = DMatrix::from_fn(k, 1, |r, _| (r.count_ones() % 2) as f64);
    Dataset::unscaled(x, y, name)
}
