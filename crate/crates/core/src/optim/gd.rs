//! Online gradient descent: one update per sample, samples visited in
//! order, the network re-solved before every update.

use nalgebra::DVector;

use super::batch::{batch_mse, check_shapes, stability_warnings};
use super::config::TrainerConfig;
use super::nonneg::NonNegProjector;
use super::report::{ExtendedParams, StopReason, TrainReport};
use super::EpochInfo;
use crate::data::Dataset;
use crate::deriv::{build_omega, sample_gradient, weighted_error};
use crate::error::Result;
use crate::network::NetworkSpec;
use crate::solve::solve;

/// Smallest gap kept between an output rate and its outgoing weight mass.
pub const RATE_FLOOR: f64 = 1e-6;

/// Gradient of `½ Σ_o (ρ_o − b_o)²` for one sample in weight order.
pub fn online_gradient(spec: &NetworkSpec, input: &[f64], target: &[f64]) -> Result<DVector<f64>> {
    let state = solve(spec, input)?;
    let resolvent = build_omega(spec, &state)?;
    Ok(sample_gradient(spec, &state, &resolvent, &spec.weight_index(), target))
}

/// Per-sample gradients of the extended parameters: `(λ⁺, λ⁻, r)`, each of
/// length `N`.
///
/// All three act on neuron `u` only through `T⁺_u` or `r_u + T⁻_u`, so with
/// `z = [I − Ω]⁻¹ (ρ − b)` restricted to outputs:
/// `∂L/∂λ⁺_u = z_u/(r_u+T⁻_u)` and
/// `∂L/∂λ⁻_u = ∂L/∂r_u = −ρ_u z_u/(r_u+T⁻_u)`.
pub fn extended_gradient(
    spec: &NetworkSpec,
    input: &[f64],
    target: &[f64],
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
    let state = solve(spec, input)?;
    let resolvent = build_omega(spec, &state)?;
    let gw = sample_gradient(spec, &state, &resolvent, &spec.weight_index(), target);
    let z = weighted_error(spec, &state, &resolvent, target);
    let n = spec.n();
    let mut gp = DVector::zeros(n);
    let mut gm = DVector::zeros(n);
    let mut gr = DVector::zeros(n);
    for u in 0..n {
        if state.is_saturated(u) {
            continue;
        }
        let cap = spec.rates()[u] + state.t_minus[u];
        gp[u] = z[u] / cap;
        gm[u] = -state.rho[u] * z[u] / cap;
        if spec.roles()[u].is_output() {
            gr[u] = gm[u];
        }
    }
    Ok((gw, gp, gm, gr))
}

pub fn train_gd(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    run(spec, data, config, false, &mut |_| {})
}

/// Gradient descent on weights, on `λ⁺`/`λ⁻` of hidden and output neurons
/// (factor `eta1`) and on output rates (factor `eta2`).
pub fn train_gd_extended(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    run(spec, data, config, true, &mut |_| {})
}

pub(crate) fn run(
    spec: &mut NetworkSpec,
    data: &Dataset,
    config: &TrainerConfig,
    extended: bool,
    observer: &mut dyn FnMut(&EpochInfo),
) -> Result<TrainReport> {
    config.validate()?;
    check_shapes(spec, data)?;
    let initial = batch_mse(spec, data)?;
    let mut report = TrainReport::new(config, initial);
    let mut weights = NonNegProjector::new(config.nonneg_policy, spec.weight_index().len());
    let mut lambdas = NonNegProjector::new(config.nonneg_policy, 2 * spec.n());
    let mut prev = initial;
    'epochs: for epoch in 0..config.max_iters {
        for s in 0..data.len() {
            let input = data.input_row(s);
            let target = data.target_row(s);
            let step = if extended {
                extended_step(spec, &input, &target, config, &mut weights, &mut lambdas)
            } else {
                online_gradient(spec, &input, &target).and_then(|g| {
                    let w = weights.step(&spec.weights_flat(), &(g * -config.eta));
                    spec.set_weights_flat(&w)
                })
            };
            if step.is_err() {
                report.stop_reason = StopReason::NumericalFailure;
                break 'epochs;
            }
        }
        let Ok(mse) = batch_mse(spec, data) else {
            report.stop_reason = StopReason::NumericalFailure;
            break;
        };
        report.loss_trace.push(mse);
        report.iterations += 1;
        observer(&EpochInfo { epoch, weights: &spec.weights_flat(), mse, mu: None, accepted: None });
        if (prev - mse).abs() < config.tolerance {
            report.stop_reason = StopReason::Tol;
            break;
        }
        prev = mse;
    }
    report.final_weights = spec.weights_flat().iter().copied().collect();
    if extended {
        report.extended = Some(ExtendedParams {
            lambda_plus: spec.lambda_plus().iter().copied().collect(),
            lambda_minus: spec.lambda_minus().iter().copied().collect(),
            rates: spec.rates().iter().copied().collect(),
        });
    }
    report.stability_warnings = stability_warnings(spec, data, config.stability_scope);
    Ok(report)
}

fn extended_step(
    spec: &mut NetworkSpec,
    input: &[f64],
    target: &[f64],
    config: &TrainerConfig,
    weights: &mut NonNegProjector,
    lambdas: &mut NonNegProjector,
) -> Result<()> {
    let n = spec.n();
    let (gw, gp, gm, gr) = extended_gradient(spec, input, target)?;
    let w = weights.step(&spec.weights_flat(), &(gw * -config.eta));

    // λ⁺ then λ⁻ stacked, trained on non-input neurons only
    let roles = spec.roles().to_vec();
    let trainable = |u: usize| !roles[u].is_input();
    let current = DVector::from_fn(2 * n, |m, _| {
        if m < n {
            spec.lambda_plus()[m]
        } else {
            spec.lambda_minus()[m - n]
        }
    });
    let delta = DVector::from_fn(2 * n, |m, _| {
        let u = m % n;
        if !trainable(u) {
            0.0
        } else if m < n {
            -config.eta1 * gp[u]
        } else {
            -config.eta1 * gm[u]
        }
    });
    let lam = lambdas.step(&current, &delta);

    let mut rates = spec.rates().clone();
    for u in 0..n {
        if spec.roles()[u].is_output() {
            let mass: f64 = spec
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, (a, _))| *a == u)
                .map(|(p, _)| w[p] + w[p + spec.edges().len()])
                .sum();
            rates[u] = (rates[u] - config.eta2 * gr[u]).max(mass + RATE_FLOOR);
        }
    }
    spec.set_weights_and_output_rates(&w, &rates)?;
    for u in (0..n).filter(|&u| trainable(u)) {
        spec.set_lambda_plus(u, lam[u])?;
        spec.set_lambda_minus(u, lam[u + n])?;
    }
    Ok(())
}
