//! Levenberg–Marquardt and LM with adaptive momentum.
//!
//! Every epoch solves `(JᵀJ + μI)δ = −G` (or the momentum variant), tries
//! `w + δ`, and keeps it only if the batch loss strictly decreases:
//! accepted epochs divide `μ` by `β`, rejected ones multiply it.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::batch::{check_shapes, stability_warnings, Problem};
use super::config::{NonNegPolicy, TrainerConfig, MU_MAX};
use super::nonneg::NonNegProjector;
use super::report::{StopReason, TrainReport};
use super::EpochInfo;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// Squared diagonal ratio of the Cholesky factor above which the damped
/// normal matrix counts as singular.
pub const MAX_NORMAL_CONDITION: f64 = 1e15;

/// `JᵀJ + μI`.
pub fn damped_normal_matrix(jacobian: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let m = jacobian.ncols();
    jacobian.transpose() * jacobian + DMatrix::identity(m, m) * mu
}

/// Cholesky factor of `h` or `None` when it is not numerically positive
/// definite; the condition estimate is `(max L_ii / min L_ii)²`.
fn factor(h: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let c = Cholesky::new(h)?;
    let d = c.l_dirty().diagonal();
    let (lo, hi) = (d.min(), d.max());
    (lo > 0.0 && (hi / lo).powi(2) <= MAX_NORMAL_CONDITION).then_some(c)
}

/// Solves `(JᵀJ + μI)δ = −G`.
///
/// ```
/// use nalgebra::{DMatrix, DVector};
/// use gnet_core::optim::lm_step;
///
/// let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
/// let g = DVector::from_vec(vec![1.0, 4.0]);
/// let d = lm_step(&j, &g, 0.0).unwrap();
/// assert!((d - DVector::from_vec(vec![-1.0, -1.0])).amax() < 1e-15);
/// ```
pub fn lm_step(jacobian: &DMatrix<f64>, grad: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    let c = factor(damped_normal_matrix(jacobian, mu))
        .ok_or_else(|| Error::SingularSystem("JᵀJ + μI is not positive definite".into()))?;
    Ok(c.solve(&(-grad)))
}

/// Scalars of one adaptive-momentum step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmAmCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta_q: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Computes `c₁ = GᵀH̃⁻¹G`, `c₂ = Gᵀδ_prev`, `c₃ = δ_prevᵀH̃δ_prev`,
/// `ΔQ = −ζ·ΔP·√c₁`, `λ₂ = ½√((c₁c₃ − c₂²)/(c₁ΔP² − ΔQ²))`,
/// `λ₁ = (−2λ₂ΔQ + c₂)/c₁` and the step
/// `δ = −(λ₁/2λ₂)H̃⁻¹G + δ_prev/(2λ₂)`.
///
/// `None` when a guard fails: `c₁ΔP² − ΔQ² ≤ 0`, `c₁c₃ − c₂² < 0`, or a
/// zero `c₁` or `λ₂`.
///
/// ```
/// use nalgebra::{DMatrix, DVector};
/// use gnet_core::optim::lm_am_coefficients;
///
/// let h = DMatrix::identity(2, 2);
/// let g = DVector::from_vec(vec![1.0, 0.0]);
/// let prev = DVector::from_vec(vec![0.0, 1.0]);
/// let (c, _) = lm_am_coefficients(&h, &g, &prev, 0.9, 0.5).unwrap();
/// assert_eq!((c.c1, c.c2, c.c3), (1.0, 0.0, 1.0));
/// assert!((c.delta_q + 0.45).abs() < 1e-12);
/// assert!((c.lambda2 - 2.2942).abs() < 1e-3);
/// ```
pub fn lm_am_coefficients(
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    delta_prev: &DVector<f64>,
    zeta: f64,
    delta_p: f64,
) -> Option<(LmAmCoefficients, DVector<f64>)> {
    let c = factor(h.clone())?;
    let hg = c.solve(grad);
    let c1 = grad.dot(&hg);
    let c2 = grad.dot(delta_prev);
    let c3 = delta_prev.dot(&(h * delta_prev));
    let delta_q = -zeta * delta_p * c1.max(0.0).sqrt();
    let den = c1 * delta_p * delta_p - delta_q * delta_q;
    let num = c1 * c3 - c2 * c2;
    if !(den > 0.0) || !(num >= 0.0) || !(c1 > 0.0) {
        return None;
    }
    let lambda2 = 0.5 * (num / den).sqrt();
    if !(lambda2 > 0.0) || !lambda2.is_finite() {
        return None;
    }
    let lambda1 = (-2.0 * lambda2 * delta_q + c2) / c1;
    let step = hg * (-lambda1 / (2.0 * lambda2)) + delta_prev / (2.0 * lambda2);
    Some((LmAmCoefficients { c1, c2, c3, delta_q, lambda1, lambda2 }, step))
}

pub fn train_lm(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    run(spec, data, config, false, &mut |_| {})
}

pub fn train_lm_am(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    run(spec, data, config, true, &mut |_| {})
}

pub(crate) fn run(
    spec: &mut NetworkSpec,
    data: &Dataset,
    config: &TrainerConfig,
    momentum: bool,
    observer: &mut dyn FnMut(&EpochInfo),
) -> Result<TrainReport> {
    config.validate()?;
    check_shapes(spec, data)?;
    let squared = config.nonneg_policy == NonNegPolicy::BetaSquare;
    let mut problem = Problem::new(spec, data, squared);
    let mut p = problem.params();
    let mut projector = (!squared).then(|| NonNegProjector::new(config.nonneg_policy, p.len()));
    let mut lin = problem.linearize(&p)?;
    let mut report = TrainReport::new(config, problem.mse(lin.half_rss));
    let mut mu = config.mu0;
    let mut delta_prev: Option<DVector<f64>> = None;

    for epoch in 0..config.max_iters {
        let h = damped_normal_matrix(&lin.jacobian, mu);
        let am = match (&delta_prev, momentum) {
            (Some(prev), true) => {
                let am = lm_am_coefficients(&h, &lin.grad, prev, config.zeta, config.delta_p);
                if am.is_none() {
                    report.counters.lm_am_fallbacks += 1;
                }
                am.map(|(_, step)| step)
            }
            _ => None,
        };
        let delta = match am {
            Some(step) => step,
            None => match factor(h) {
                Some(c) => c.solve(&(-&lin.grad)),
                None => {
                    report.stop_reason = StopReason::SingularJacobian;
                    break;
                }
            },
        };
        if delta.iter().any(|x| !x.is_finite()) {
            report.stop_reason = StopReason::SingularJacobian;
            break;
        }
        let (trial, frozen) = match &projector {
            Some(pr) => pr.propose(&p, &delta),
            None => (&p + &delta, Vec::new()),
        };
        let current = lin.half_rss;
        let trial_loss = problem.half_rss(&trial).unwrap_or(f64::INFINITY);
        report.mu_trace.push(mu);
        let accepted = trial_loss < current;
        if accepted {
            match problem.linearize(&trial) {
                Ok(next) => {
                    if let Some(pr) = projector.as_mut() {
                        pr.commit(frozen);
                    }
                    delta_prev = Some(&trial - &p);
                    p = trial;
                    lin = next;
                    mu /= config.beta;
                }
                Err(_) => {
                    report.stop_reason = StopReason::NumericalFailure;
                    report.mu_trace.pop();
                    break;
                }
            }
        } else {
            report.counters.rejected_epochs += 1;
            mu *= config.beta;
        }
        let mse = problem.mse(lin.half_rss);
        let prev_mse = problem.mse(current);
        report.accepted.push(accepted);
        report.loss_trace.push(mse);
        report.iterations += 1;
        let w = problem.weights(&p);
        observer(&EpochInfo { epoch, weights: &w, mse, mu: Some(report.mu_trace[epoch]), accepted: Some(accepted) });
        if accepted && (prev_mse - mse).abs() < config.tolerance {
            report.stop_reason = StopReason::Tol;
            break;
        }
        if mu > MU_MAX {
            report.stop_reason = StopReason::DampingOverflow;
            break;
        }
    }
    let w = problem.weights(&p);
    spec.set_weights_flat(&w)?;
    report.final_weights = w.iter().copied().collect();
    report.stability_warnings = stability_warnings(spec, data, config.stability_scope);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_damping_is_gauss_newton() {
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.25]);
        let e = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let g = j.transpose() * &e;
        let d = lm_step(&j, &g, 0.0).unwrap();
        let normal = j.transpose() * &j;
        assert!((normal * d + g).amax() < 1e-10);
    }

    #[test]
    fn heavy_damping_approaches_scaled_gradient() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0]);
        let g = DVector::from_vec(vec![0.3, -0.7]);
        let mu = 1e8;
        let d = lm_step(&j, &g, mu).unwrap();
        assert!((d + &g / mu).amax() < 1e-7 * g.amax() / mu * 1e3);
    }

    #[test]
    fn guard_rejects_parallel_previous_step() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![1.0, 0.0]);
        // c1 c3 - c2^2 = 0 is allowed, but lambda2 = 0 then
        assert!(lm_am_coefficients(&h, &g, &DVector::from_vec(vec![1.0, 0.0]), 0.9, 0.5).is_none());
    }
}
