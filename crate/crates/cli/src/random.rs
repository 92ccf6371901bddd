//! Random networks and data for gradient checks.

use gnet_core::data::Dataset;
use gnet_core::network::{NetworkSpec, Role};
use gnet_core::solve::solve;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Layered network with 2..=4 layers of 1..=3 neurons, at most `max_n`
/// neurons in total.
pub fn feedforward(rng: &mut ChaCha8Rng, max_n: usize) -> NetworkSpec {
    loop {
        let layers = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=3)).collect();
        if sizes.iter().sum::<usize>() > max_n {
            continue;
        }
        let rate = rng.random_range(0.5..2.0);
        let mut init = ChaCha8Rng::seed_from_u64(rng.random());
        if let Ok(spec) = NetworkSpec::layered(&sizes, rate, move || init.random_range(0.05..1.0)) {
            return spec;
        }
    }
}

/// Network with cycles and self-loops among non-input neurons whose
/// activities stay well below one for inputs in `[0, 1]`.
pub fn recurrent(rng: &mut ChaCha8Rng, max_n: usize) -> NetworkSpec {
    let max_n = max_n.max(3);
    loop {
        let n = rng.random_range(3..=max_n);
        let n_in = rng.random_range(1..=2.min(n - 2));
        let n_out = rng.random_range(1..=2.min(n - n_in));
        let roles: Vec<Role> = (0..n)
            .map(|i| match i {
                i if i < n_in => Role::Input,
                i if i >= n - n_out => Role::Output,
                _ => Role::Hidden,
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
        let calm = |x: &[f64]| solve(&spec, x).map(|s| s.saturated.is_empty() && s.rho.max() < 0.95).unwrap_or(false);
        let probes: Vec<Vec<f64>> = (0..4).map(|_| (0..n_in).map(|_| rng.random::<f64>()).collect()).collect();
        if !spec.is_feedforward() && probes.iter().all(|x| calm(x)) && calm(&vec![1.0; n_in]) {
            return spec;
        }
    }
}

/// `k` uniform samples sized for `spec`.
pub fn dataset(rng: &mut ChaCha8Rng, spec: &NetworkSpec, k: usize) -> Dataset {
    let x = DMatrix::from_fn(k, spec.inputs().len(), |_, _| rng.random::<f64>());
    let y = DMatrix::from_fn(k, spec.outputs().len(), |_, _| rng.random::<f64>());
    Dataset::unscaled(x, y, "random").expect("values in [0, 1]")
}
