use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::solve::{solve_feedforward, solve_fixed_point, ActivityState, FixedPointOptions};

/// Which parameter vector to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdTarget {
    /// Trainable weights in flat order.
    Weights,
    /// `λ⁺` of every neuron (input entries are overwritten by the pattern,
    /// so their derivative is zero).
    LambdaPlus,
    LambdaMinus,
    /// Service rates of output neurons; other entries are zero.
    OutputRates,
}

/// Fixed-point solves for differencing must be far tighter than the step.
const TIGHT: FixedPointOptions = FixedPointOptions { tol: 1e-15, max_iter: 1_000_000, damping: 0.0 };

fn solve_tight(spec: &NetworkSpec, input: &[f64]) -> Result<ActivityState> {
    if spec.is_feedforward() {
        solve_feedforward(spec, input)
    } else {
        solve_fixed_point(spec, input, &TIGHT)
    }
}

/// `½ Σ_k Σ_o (ρ_o − b_o)²` summed over the dataset.
fn half_rss(spec: &NetworkSpec, data: &Dataset) -> Result<f64> {
    let outputs = spec.outputs();
    let mut total = 0.0;
    for k in 0..data.len() {
        let state = solve_tight(spec, &data.input_row(k))?;
        for (c, &o) in outputs.iter().enumerate() {
            let e = state.rho[o] - data.targets()[(k, c)];
            total += 0.5 * e * e;
        }
    }
    Ok(total)
}

fn perturbed(spec: &NetworkSpec, target: FdTarget, m: usize, value: f64) -> Result<NetworkSpec> {
    let mut s = spec.clone();
    match target {
        FdTarget::Weights => {
            let mut w = s.weights_flat();
            w[m] = value;
            s.set_weights_flat(&w)?;
        }
        FdTarget::LambdaPlus => s.set_lambda_plus(m, value)?,
        FdTarget::LambdaMinus => s.set_lambda_minus(m, value)?,
        FdTarget::OutputRates => s.set_output_rate(m, value)?,
    }
    Ok(s)
}

fn current(spec: &NetworkSpec, target: FdTarget) -> DVector<f64> {
    match target {
        FdTarget::Weights => spec.weights_flat(),
        FdTarget::LambdaPlus => spec.lambda_plus().clone(),
        FdTarget::LambdaMinus => spec.lambda_minus().clone(),
        FdTarget::OutputRates => spec.rates().clone(),
    }
}

/// Central-difference gradient of `½ RSS` with step `h`.
///
/// A coordinate closer than `h` to its lower bound (zero for weights and
/// rates of signals, the outgoing mass for an output rate) uses the
/// one-sided second-order formula `(−3f(x) + 4f(x+h) − f(x+2h))/(2h)`, so
/// no perturbed point leaves the feasible set.
pub fn finite_diff_gradient(spec: &NetworkSpec, data: &Dataset, h: f64, target: FdTarget) -> Result<DVector<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {h}")));
    }
    let x = current(spec, target);
    let mut g = DVector::zeros(x.len());
    for m in 0..x.len() {
        let floor = match target {
            FdTarget::OutputRates if !spec.roles()[m].is_output() => continue,
            FdTarget::OutputRates => spec.outgoing_mass(m),
            _ => 0.0,
        };
        let eval = |v: f64| -> Result<f64> {
            half_rss(&perturbed(spec, target, m, v)?, data)
        };
        let wrap = |e: Error| Error::Coordinate { coordinate: m, source: Box::new(e) };
        g[m] = if x[m] - floor >= h {
            (eval(x[m] + h).map_err(wrap)? - eval(x[m] - h).map_err(wrap)?) / (2.0 * h)
        } else {
            let f0 = eval(x[m]).map_err(wrap)?;
            let f1 = eval(x[m] + h).map_err(wrap)?;
            let f2 = eval(x[m] + 2.0 * h).map_err(wrap)?;
            (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
        };
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deriv::assemble_gradient;
    use crate::optim::{solve_all, weight_sampler};
    use nalgebra::DMatrix;

    fn net_and_data(seed: u64) -> (NetworkSpec, Dataset) {
        let spec = NetworkSpec::layered(&[2, 3, 1], 0.8, weight_sampler(seed, [0.1, 1.0])).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.2, 0.9, 0.7, 0.1, 0.5, 0.5]);
        let y = DMatrix::from_row_slice(3, 1, &[0.3, 0.6, 0.1]);
        (spec, Dataset::unscaled(x, y, "t").unwrap())
    }

    #[test]
    fn matches_analytic_weight_gradient() {
        let (spec, data) = net_and_data(3);
        let fd = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::Weights).unwrap();
        let bundle = assemble_gradient(&spec, &data, &solve_all(&spec, &data).unwrap()).unwrap();
        // bundle.grad is JᵀE with E = b − ρ, i.e. the gradient of ½‖E‖²
        for (a, b) in fd.iter().zip(bundle.grad.iter()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let (spec, data) = net_and_data(5);
        let pred = crate::optim::batch_forward(&spec, data.inputs()).unwrap();
        let y = pred.columns(spec.n() - 1, 1).into_owned();
        let exact = Dataset::unscaled(data.inputs().clone(), y, "t").unwrap();
        let g = finite_diff_gradient(&spec, &exact, 1e-5, FdTarget::Weights).unwrap();
        assert!(g.amax() <= 1e-7);
    }

    #[test]
    fn non_output_rates_are_skipped() {
        let (spec, data) = net_and_data(1);
        let g = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::OutputRates).unwrap();
        assert!(g.rows(0, spec.n() - 1).iter().all(|&x| x == 0.0));
        assert!(g[spec.n() - 1] != 0.0);
    }

    #[test]
    fn rejects_bad_step() {
        let (spec, data) = net_and_data(1);
        assert!(finite_diff_gradient(&spec, &data, 0.0, FdTarget::Weights).is_err());
    }
}
