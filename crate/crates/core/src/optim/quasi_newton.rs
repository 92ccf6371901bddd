//! BFGS and DFP with a Cholesky-factored Hessian approximation.
//!
//! `H̃ = L·Lᵀ` is updated through a factor `A` with `H̃' = A·Aᵀ`:
//!
//! * BFGS: `c² = sᵀy / sᵀH̃s`, `v = c·Lᵀs`, `A = L + (y − Lv)vᵀ / vᵀv`.
//!   Expanding `AAᵀ` gives the textbook BFGS formula
//!   `H̃ + yyᵀ/sᵀy − H̃ssᵀH̃/sᵀH̃s`; the vector must be built from `Lᵀs`
//!   (not `Ls`) for the cross terms to cancel.
//! * DFP: solve `Lv = c·y` with `c² = sᵀy / yᵀH̃⁻¹y`, then
//!   `A = L − y(sᵀL − vᵀ)/sᵀy`. This choice makes `vᵀv = sᵀy`, which is
//!   what `AAᵀ` needs to equal the DFP update; for `H̃ = I` it reduces to
//!   `c² = sᵀy / yᵀy`.
//!
//! Both satisfy the secant condition `H̃'s = y`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::batch::{check_shapes, stability_warnings, Problem};
use super::config::{LineSearch, NonNegPolicy, TrainerConfig};
use super::line_search::line_search;
use super::nonneg::NonNegProjector;
use super::report::{Counters, StopReason, TrainReport};
use super::EpochInfo;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// Curvature pairs with `sᵀy ≤ CURVATURE_EPS·‖s‖‖y‖` are skipped.
pub const CURVATURE_EPS: f64 = 1e-12;
/// Symmetry tolerance of the SPD check.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuasiNewtonKind {
    Bfgs,
    Dfp,
}

/// `c² = sᵀy / sᵀH̃s` with `H̃ = LLᵀ`.
pub fn bfgs_c_squared(s: &DVector<f64>, y: &DVector<f64>, l: &DMatrix<f64>) -> f64 {
    s.dot(y) / (l.transpose() * s).norm_squared()
}

/// `c² = sᵀy / yᵀH̃⁻¹y` with `H̃ = LLᵀ`.
pub fn dfp_c_squared(s: &DVector<f64>, y: &DVector<f64>, l: &DMatrix<f64>) -> Option<f64> {
    let w = l.solve_lower_triangular(y)?;
    Some(s.dot(y) / w.norm_squared())
}

/// Factor `A` of the BFGS update; `None` when a denominator vanishes.
pub fn bfgs_factor(l: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> Option<DMatrix<f64>> {
    let c2 = bfgs_c_squared(s, y, l);
    if !(c2 > 0.0) || !c2.is_finite() {
        return None;
    }
    let v = (l.transpose() * s) * c2.sqrt();
    let vv = v.norm_squared();
    if !(vv > 0.0) {
        return None;
    }
    Some(l + (y - l * &v) * v.transpose() / vv)
}

/// Factor `A` of the DFP update; `None` when a denominator vanishes.
pub fn dfp_factor(l: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> Option<DMatrix<f64>> {
    let c2 = dfp_c_squared(s, y, l)?;
    if !(c2 > 0.0) || !c2.is_finite() {
        return None;
    }
    let v = l.solve_lower_triangular(&(y * c2.sqrt()))?;
    let sy = s.dot(y);
    Some(l - y * ((l.transpose() * s) - v).transpose() / sy)
}

/// What happened to `H̃` in one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Updated,
    /// Curvature pair rejected; `H̃` unchanged.
    Skipped,
    /// Factorization of the new matrix failed; `H̃` reset to the identity.
    Reset,
}

/// Hessian approximation and its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiNewtonState {
    pub h_tilde: DMatrix<f64>,
    pub chol: DMatrix<f64>,
}

impl QuasiNewtonState {
    pub fn identity(m: usize) -> Self {
        QuasiNewtonState { h_tilde: DMatrix::identity(m, m), chol: DMatrix::identity(m, m) }
    }

    pub fn is_identity(&self) -> bool {
        self.h_tilde == DMatrix::identity(self.h_tilde.nrows(), self.h_tilde.ncols())
    }

    /// Solves `H̃δ = −g`.
    pub fn direction(&self, g: &DVector<f64>) -> DVector<f64> {
        let z = self.chol.solve_lower_triangular(&(-g)).expect("factor has a positive diagonal");
        self.chol.transpose().solve_upper_triangular(&z).expect("factor has a positive diagonal")
    }

    /// Symmetric within [`SYMMETRY_TOL`] and Cholesky-factorizable.
    pub fn is_spd(&self) -> bool {
        let h = &self.h_tilde;
        (h - h.transpose()).amax() <= SYMMETRY_TOL && Cholesky::new(h.clone()).is_some()
    }

    pub fn update(&mut self, kind: QuasiNewtonKind, s: &DVector<f64>, y: &DVector<f64>) -> UpdateOutcome {
        let sy = s.dot(y);
        if !(sy > CURVATURE_EPS * s.norm() * y.norm()) {
            return UpdateOutcome::Skipped;
        }
        let factor = match kind {
            QuasiNewtonKind::Bfgs => bfgs_factor(&self.chol, s, y),
            QuasiNewtonKind::Dfp => dfp_factor(&self.chol, s, y),
        };
        let Some(a) = factor else {
            return UpdateOutcome::Skipped;
        };
        let h = &a * a.transpose();
        let h = (&h + h.transpose()) * 0.5;
        match Cholesky::<f64, Dyn>::new(h.clone()) {
            Some(c) if h.iter().all(|x| x.is_finite()) => {
                self.chol = c.l();
                self.h_tilde = h;
                UpdateOutcome::Updated
            }
            _ => {
                *self = Self::identity(s.len());
                UpdateOutcome::Reset
            }
        }
    }
}

/// Smooth objective for the generic driver.
pub trait Objective {
    fn value(&mut self, x: &DVector<f64>) -> Result<f64>;
    fn value_and_gradient(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

/// Trace of a quasi-Newton run.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiNewtonRun {
    pub x: DVector<f64>,
    /// Objective after each epoch.
    pub trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub counters: Counters,
    pub hessian_spd: Vec<Option<bool>>,
    /// Direction of the first epoch.
    pub first_direction: Option<DVector<f64>>,
}

/// Maps a raw trial point onto the feasible set.
pub type Projection<'r> = dyn Fn(&DVector<f64>) -> DVector<f64> + 'r;

/// Step-length rule: returns `α` for the direction `δ` at `x` given `f(x)`
/// and `g(x)` (`0` = no acceptable step). Trial points should be passed
/// through the projection before evaluation.
pub type StepRule<'r, O> =
    dyn FnMut(&mut O, &DVector<f64>, f64, &DVector<f64>, &DVector<f64>, &Projection<'_>) -> Result<f64> + 'r;

/// Per-epoch callback `(epoch, x, f)`.
pub type QnObserver<'r> = dyn FnMut(usize, &DVector<f64>, f64) + 'r;

/// Minimizes `obj` from `x0`. Each epoch: direction from `H̃`, step length
/// from `step`, projection, new gradient, update of `H̃` with the realized
/// `s` and `y`. Stops after `max_iters` epochs or when the objective
/// changes by less than `tol`.
#[allow(clippy::too_many_arguments)]
pub fn quasi_newton_minimize<O: Objective>(
    obj: &mut O,
    x0: DVector<f64>,
    kind: QuasiNewtonKind,
    max_iters: usize,
    tol: f64,
    step: &mut StepRule<'_, O>,
    mut projector: Option<&mut NonNegProjector>,
    observer: &mut QnObserver<'_>,
) -> Result<QuasiNewtonRun> {
    let m = x0.len();
    let mut state = QuasiNewtonState::identity(m);
    let mut x = x0;
    let (mut f, mut g) = obj.value_and_gradient(&x)?;
    let mut run = QuasiNewtonRun {
        x: x.clone(),
        trace: Vec::new(),
        stop_reason: StopReason::MaxIters,
        counters: Counters::default(),
        hessian_spd: Vec::new(),
        first_direction: None,
    };
    let mut fresh_reset = false;
    for epoch in 0..max_iters {
        run.hessian_spd.push(if fresh_reset { None } else { Some(state.is_spd()) });
        fresh_reset = false;
        let mut delta = state.direction(&g);
        if !(g.dot(&delta) < 0.0) && !state.is_identity() {
            state = QuasiNewtonState::identity(m);
            run.counters.cholesky_resets += 1;
            delta = -&g;
        }
        if epoch == 0 {
            run.first_direction = Some(delta.clone());
        }
        let alpha = {
            let probe = projector.as_deref();
            let project = |t: &DVector<f64>| match probe {
                Some(p) => p.propose(&x, &(t - &x)).0,
                None => t.clone(),
            };
            let mut alpha = step(obj, &x, f, &g, &delta, &project)?;
            if alpha == 0.0 && !state.is_identity() {
                run.counters.line_search_failures += 1;
                state = QuasiNewtonState::identity(m);
                run.counters.cholesky_resets += 1;
                delta = -&g;
                alpha = step(obj, &x, f, &g, &delta, &project)?;
            }
            alpha
        };
        if alpha == 0.0 {
            run.counters.line_search_failures += 1;
            run.trace.push(f);
            observer(epoch, &x, f);
            run.stop_reason = StopReason::Tol;
            break;
        }
        let raw = &delta * alpha;
        let x_new = match projector.as_deref_mut() {
            Some(p) => p.step(&x, &raw),
            None => &x + &raw,
        };
        let Ok((f_new, g_new)) = obj.value_and_gradient(&x_new) else {
            run.stop_reason = StopReason::NumericalFailure;
            break;
        };
        let s = &x_new - &x;
        let y = &g_new - &g;
        match state.update(kind, &s, &y) {
            UpdateOutcome::Updated => {}
            UpdateOutcome::Skipped => run.counters.skipped_updates += 1,
            UpdateOutcome::Reset => {
                run.counters.cholesky_resets += 1;
                fresh_reset = true;
            }
        }
        let change = (f - f_new).abs();
        x = x_new;
        f = f_new;
        g = g_new;
        run.trace.push(f);
        observer(epoch, &x, f);
        if change < tol {
            run.stop_reason = StopReason::Tol;
            break;
        }
    }
    run.x = x;
    Ok(run)
}

/// `½‖E‖²` of a network batch with projected trial points.
struct NetObjective<'p, 'd> {
    problem: &'p mut Problem<'d>,
}

impl Objective for NetObjective<'_, '_> {
    fn value(&mut self, x: &DVector<f64>) -> Result<f64> {
        self.problem.half_rss(x)
    }

    fn value_and_gradient(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let lin = self.problem.linearize(x)?;
        Ok((lin.half_rss, lin.grad))
    }
}

pub fn train_bfgs(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    run(spec, data, config, QuasiNewtonKind::Bfgs, &mut |_| {})
}

pub fn train_dfp(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    run(spec, data, config, QuasiNewtonKind::Dfp, &mut |_| {})
}

pub(crate) fn run(
    spec: &mut NetworkSpec,
    data: &Dataset,
    config: &TrainerConfig,
    kind: QuasiNewtonKind,
    observer: &mut dyn FnMut(&EpochInfo),
) -> Result<TrainReport> {
    config.validate()?;
    check_shapes(spec, data)?;
    let squared = config.nonneg_policy == NonNegPolicy::BetaSquare;
    let mut problem = Problem::new(spec, data, squared);
    let x0 = problem.params();
    let k = data.len() as f64;
    let initial = problem.half_rss(&x0)?;
    let initial = problem.mse(initial);
    let mut report = TrainReport::new(config, initial);
    let mut projector = (!squared).then(|| NonNegProjector::new(config.nonneg_policy, x0.len()));

    let line = config.line_search;
    let mut step_rule = move |o: &mut NetObjective,
                              x: &DVector<f64>,
                              f: f64,
                              g: &DVector<f64>,
                              d: &DVector<f64>,
                              project: &Projection<'_>| match line {
        LineSearch::None => Ok(1.0),
        LineSearch::Backtracking => line_search(|t: &DVector<f64>| o.value(&project(t)), x, f, g, d),
    };
    let mut obj = NetObjective { problem: &mut problem };
    let tol = config.tolerance * k / 2.0;
    let mut qn_observer = |epoch: usize, x: &DVector<f64>, f: f64| {
        let w = if squared { x.map(|t| t * t) } else { x.clone() };
        observer(&EpochInfo { epoch, weights: &w, mse: 2.0 * f / k, mu: None, accepted: None });
    };
    let outcome = quasi_newton_minimize(
        &mut obj,
        x0,
        kind,
        config.max_iters,
        tol,
        &mut step_rule,
        projector.as_mut(),
        &mut qn_observer,
    );
    let outcome = match outcome {
        Ok(o) => o,
        Err(Error::Sample { .. } | Error::NonConvergence { .. } | Error::SingularSystem(_)) => {
            report.stop_reason = StopReason::NumericalFailure;
            report.final_weights = spec.weights_flat().iter().copied().collect();
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let w = problem.weights(&outcome.x);
    spec.set_weights_flat(&w)?;
    report.loss_trace = outcome.trace.iter().map(|f| 2.0 * f / k).collect();
    report.iterations = report.loss_trace.len();
    report.stop_reason = outcome.stop_reason;
    report.counters = outcome.counters;
    report.hessian_spd = outcome.hessian_spd;
    report.final_weights = w.iter().copied().collect();
    report.stability_warnings = stability_warnings(spec, data, config.stability_scope);
    Ok(report)
}
