#![allow(dead_code)]

use gnet_core::data::Dataset;
use gnet_core::network::{NetworkSpec, Role};
use gnet_core::solve::solve;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random layered network with 2..=4 layers and at most `max_n` neurons.
pub fn random_feedforward(rng: &mut ChaCha8Rng, max_n: usize) -> NetworkSpec {
    loop {
        let layers = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=3)).collect();
        if sizes.iter().sum::<usize>() > max_n {
            continue;
        }
        let rate = rng.random_range(0.5..2.0);
        let mut r2 = ChaCha8Rng::seed_from_u64(rng.random());
        return NetworkSpec::layered(&sizes, rate, move || r2.random_range(0.05..1.0)).unwrap();
    }
}

/// Random network with cycles (hidden ↔ hidden, output → hidden) and
/// self-loops, whose activities all stay below one for inputs in `[0, 1]`.
pub fn random_recurrent(rng: &mut ChaCha8Rng, max_n: usize) -> NetworkSpec {
    loop {
        let n = rng.random_range(3..=max_n);
        let n_in = rng.random_range(1..=2.min(n - 2));
        let n_out = rng.random_range(1..=2.min(n - n_in));
        let roles: Vec<Role> = (0..n)
            .map(|i| {
                if i < n_in {
                    Role::Input
                } else if i >= n - n_out {
                    Role::Output
                } else {
                    Role::Hidden
                }
            })
            .collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in n_in..n {
                if rng.random::<f64>() < 0.5 {
                    edges.push((u, v));
                }
            }
        }
        // every non-output neuron needs outgoing mass
        for u in 0..n - n_out {
            if !edges.iter().any(|&(a, _)| a == u) {
                edges.push((u, rng.random_range(n_in..n)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut wp = DMatrix::zeros(n, n);
        let mut wm = DMatrix::zeros(n, n);
        for &(u, v) in &edges {
            wp[(u, v)] = rng.random_range(0.05..1.0);
            wm[(u, v)] = rng.random_range(0.05..1.0);
        }
        let rates = DVector::from_fn(n, |i, _| wp.row(i).sum() + wm.row(i).sum() + rng.random_range(0.5..1.5));
        let lm = DVector::from_fn(n, |i, _| if i >= n_in { rng.random_range(0.0..0.3) } else { 0.0 });
        let Ok(spec) = NetworkSpec::from_parts(roles, edges, wp, wm, rates, DVector::zeros(n), lm) else {
            continue;
        };
        let ok = (0..4).all(|_| {
            let x: Vec<f64> = (0..n_in).map(|_| rng.random::<f64>()).collect();
            solve(&spec, &x).map(|s| s.saturated.is_empty() && s.rho.max() < 0.95).unwrap_or(false)
        }) && solve(&spec, &vec![1.0; n_in]).map(|s| s.saturated.is_empty() && s.rho.max() < 0.95).unwrap_or(false);
        if ok && !spec.is_feedforward() {
            return spec;
        }
    }
}

/// `k` random samples sized for `spec`.
pub fn random_dataset(rng: &mut ChaCha8Rng, spec: &NetworkSpec, k: usize) -> Dataset {
    let i = spec.inputs().len();
    let o = spec.outputs().len();
    let x = DMatrix::from_fn(k, i, |_, _| rng.random::<f64>());
    let y = DMatrix::from_fn(k, o, |_, _| rng.random::<f64>());
    Dataset::unscaled(x, y, "random").unwrap()
}

/// `|a − b| ≤ max(rel·|b|, abs)`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= (rel * b.abs()).max(abs)
}
