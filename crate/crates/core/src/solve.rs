//! Steady-state activity rates.
//!
//! For each neuron `i` the equilibrium satisfies
//! `ρ_i = T⁺_i / (r_i + T⁻_i)` with
//! `T⁺_i = λ⁺_i + Σ_j ρ_j w⁺_ji` and `T⁻_i = λ⁻_i + Σ_j ρ_j w⁻_ji`.
//! Any `ρ_i > 1` is replaced by `1` and the neuron is recorded as saturated.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkSpec;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Steady-state solution for one input pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityState {
    pub rho: DVector<f64>,
    pub t_plus: DVector<f64>,
    pub t_minus: DVector<f64>,
    /// Neurons whose activity was clamped to one, in increasing order.
    pub saturated: Vec<usize>,
    /// Max-norm of `ρ_i (r_i + T⁻_i) − T⁺_i` over unsaturated neurons.
    pub residual: f64,
}

impl ActivityState {
    pub fn is_saturated(&self, i: usize) -> bool {
        self.saturated.binary_search(&i).is_ok()
    }
}

/// Options of the successive-substitution solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight kept on the previous iterate, in `[0, 1)`. Zero is plain
    /// substitution.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol: DEFAULT_TOLERANCE, max_iter: DEFAULT_MAX_ITER, damping: 0.0 }
    }
}

fn inflow(spec: &NetworkSpec, rho: &DVector<f64>, lp: &DVector<f64>, i: usize) -> (f64, f64) {
    let (wp, wm) = (spec.w_plus(), spec.w_minus());
    let mut tp = lp[i];
    let mut tm = spec.lambda_minus()[i];
    for j in 0..spec.n() {
        tp += rho[j] * wp[(j, i)];
        tm += rho[j] * wm[(j, i)];
    }
    (tp, tm)
}

/// Activity `T⁺/(r+T⁻)` clamped to one; the flag reports the clamp.
fn activity(tp: f64, tm: f64, r: f64) -> (f64, bool) {
    let rho = tp / (r + tm);
    if rho > 1.0 {
        (1.0, true)
    } else {
        (rho, false)
    }
}

fn finish(spec: &NetworkSpec, rho: DVector<f64>, lp: &DVector<f64>) -> ActivityState {
    let n = spec.n();
    let mut t_plus = DVector::zeros(n);
    let mut t_minus = DVector::zeros(n);
    let mut saturated = Vec::new();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let (tp, tm) = inflow(spec, &rho, lp, i);
        t_plus[i] = tp;
        t_minus[i] = tm;
        let r = spec.rates()[i];
        if rho[i] >= 1.0 && tp >= r + tm {
            saturated.push(i);
        } else {
            residual = residual.max((rho[i] * (r + tm) - tp).abs());
        }
    }
    ActivityState { rho, t_plus, t_minus, saturated, residual }
}

/// One forward sweep in topological order. Exact for acyclic networks.
pub fn solve_feedforward(spec: &NetworkSpec, input: &[f64]) -> Result<ActivityState> {
    let order = spec.topological_order().ok_or_else(|| {
        Error::Topology("network has a cycle or a self-loop, use the fixed-point solver".into())
    })?;
    let lp = spec.effective_lambda_plus(input)?;
    let mut rho = DVector::zeros(spec.n());
    for &i in order {
        let (tp, tm) = inflow(spec, &rho, &lp, i);
        rho[i] = activity(tp, tm, spec.rates()[i]).0;
    }
    Ok(finish(spec, rho, &lp))
}

/// Successive substitution starting from `ρ = 0`.
pub fn solve_fixed_point(
    spec: &NetworkSpec,
    input: &[f64],
    options: &FixedPointOptions,
) -> Result<ActivityState> {
    let start = DVector::zeros(spec.n());
    solve_fixed_point_from(spec, input, &start, options)
}

/// Successive substitution from an arbitrary starting activity vector.
///
/// Every sweep computes `T⁺`, `T⁻` from the previous (clamped) iterate and
/// then the new activities; it stops when the max-norm change drops below
/// `tol`.
pub fn solve_fixed_point_from(
    spec: &NetworkSpec,
    input: &[f64],
    start: &DVector<f64>,
    options: &FixedPointOptions,
) -> Result<ActivityState> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {}", options.tol)));
    }
    if !(0.0..1.0).contains(&options.damping) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in [0, 1), got {}",
            options.damping
        )));
    }
    if start.len() != spec.n() {
        return Err(Error::Shape(format!("start has length {}, expected {}", start.len(), spec.n())));
    }
    let lp = spec.effective_lambda_plus(input)?;
    let n = spec.n();
    let mut rho = start.map(|x| x.clamp(0.0, 1.0));
    let mut next = DVector::zeros(n);
    let mut change = f64::INFINITY;
    for _ in 0..options.max_iter {
        for i in 0..n {
            let (tp, tm) = inflow(spec, &rho, &lp, i);
            let (fresh, _) = activity(tp, tm, spec.rates()[i]);
            next[i] = if options.damping > 0.0 {
                options.damping * rho[i] + (1.0 - options.damping) * fresh
            } else {
                fresh
            };
        }
        change = (&next - &rho).amax();
        std::mem::swap(&mut rho, &mut next);
        if change < options.tol {
            return Ok(finish(spec, rho, &lp));
        }
    }
    let state = finish(spec, rho, &lp);
    Err(Error::NonConvergence { iterations: options.max_iter, residual: state.residual.max(change) })
}

/// Feedforward sweep when the network is acyclic, fixed point otherwise.
pub fn solve(spec: &NetworkSpec, input: &[f64]) -> Result<ActivityState> {
    if spec.is_feedforward() {
        solve_feedforward(spec, input)
    } else {
        solve_fixed_point(spec, input, &FixedPointOptions::default())
    }
}

/// Which neurons a stability check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityScope {
    #[default]
    All,
    OutputsOnly,
}

/// Per-neuron outcome of the `T⁺_i < r_i + T⁻_i` test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `(neuron, stable)` for every checked neuron.
    pub neurons: Vec<(usize, bool)>,
    pub stable: bool,
}

impl StabilityReport {
    pub fn unstable(&self) -> Vec<usize> {
        self.neurons.iter().filter(|(_, ok)| !ok).map(|(i, _)| *i).collect()
    }
}

/// Relative margin below which a load `T⁺/(r+T⁻)` counts as unstable.
///
/// Iterates that converge onto the boundary `ρ = 1` from below land within
/// the solver tolerance of it, so the strict inequality is tested with this
/// margin.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Checks queue stability `T⁺_i < r_i + T⁻_i`. Saturated neurons are
/// always unstable.
pub fn check_stability(
    state: &ActivityState,
    spec: &NetworkSpec,
    scope: StabilityScope,
) -> StabilityReport {
    let neurons: Vec<(usize, bool)> = (0..spec.n())
        .filter(|&i| scope == StabilityScope::All || spec.roles()[i].is_output())
        .map(|i| {
            let capacity = spec.rates()[i] + state.t_minus[i];
            let ok = !state.is_saturated(i) && state.t_plus[i] < capacity * (1.0 - STABILITY_MARGIN);
            (i, ok)
        })
        .collect();
    let stable = neurons.iter().all(|(_, ok)| *ok);
    StabilityReport { neurons, stable }
}
