//! Analytic first derivatives of the activity rates and of the loss.
//!
//! Differentiating `ρ_i (r_i + T⁻_i) = T⁺_i` with respect to any parameter
//! gives, with row vectors, `∂ρ = s·[I − Ω]⁻¹` where
//! `Ω_ij = (w⁺_ij − w⁻_ij ρ_j)/(r_j + T⁻_j)` and `s` is the direct effect of
//! the parameter on each neuron. For a weight `w*_uv` the source is
//! `s = ρ_u γ*_uv`.
//!
//! Two refinements of the textbook case table are applied, both confirmed
//! by central finite differences in the tests:
//!
//! * the `−1/(r_u + T⁻_u)` term at `i = u` comes from `r_u = Σ_j (w⁺_uj +
//!   w⁻_uj)`. Output neurons have a free rate that does not move with their
//!   outgoing weights, so the term is absent for them.
//! * a saturated neuron is pinned at `ρ = 1`; its column of `Ω` and its
//!   entry of every source vector are zero.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Sign, WeightIndex};
use crate::solve::ActivityState;

/// Condition-number estimate above which `I − Ω` is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// `Ω` together with `[I − Ω]⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub omega: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

/// `r_i + T⁻_i`.
fn capacity(spec: &NetworkSpec, state: &ActivityState, i: usize) -> f64 {
    spec.rates()[i] + state.t_minus[i]
}

/// Builds `Ω` with the columns of saturated neurons zeroed.
pub fn omega(spec: &NetworkSpec, state: &ActivityState) -> DMatrix<f64> {
    let n = spec.n();
    let (wp, wm) = (spec.w_plus(), spec.w_minus());
    DMatrix::from_fn(n, n, |i, j| {
        if state.is_saturated(j) {
            0.0
        } else {
            (wp[(i, j)] - wm[(i, j)] * state.rho[j]) / capacity(spec, state, j)
        }
    })
}

fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_condition(a: &DMatrix<f64>, inv: &DMatrix<f64>) -> Result<()> {
    let cond = norm_one(a) * norm_one(inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SingularSystem(format!("I - Omega condition estimate {cond:e}")));
    }
    Ok(())
}

/// `Ω` and its resolvent. Feedforward networks use back-substitution on the
/// triangular system; other networks use a dense LU factorization.
pub fn build_omega(spec: &NetworkSpec, state: &ActivityState) -> Result<Resolvent> {
    match spec.topological_order() {
        Some(order) => build_omega_triangular(spec, state, order),
        None => build_omega_dense(spec, state),
    }
}

/// Dense LU path, valid for any topology.
pub fn build_omega_dense(spec: &NetworkSpec, state: &ActivityState) -> Result<Resolvent> {
    let omega = omega(spec, state);
    let n = spec.n();
    let a = DMatrix::identity(n, n) - &omega;
    let inverse = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("I - Omega is singular".into()))?;
    check_condition(&a, &inverse)?;
    Ok(Resolvent { omega, inverse })
}

/// With neurons listed in topological order `I − Ω` is unit upper
/// triangular, so its inverse follows from back-substitution.
fn build_omega_triangular(spec: &NetworkSpec, state: &ActivityState, order: &[usize]) -> Result<Resolvent> {
    let omega = omega(spec, state);
    let n = spec.n();
    // permuted A[p, q] = (I - Omega)[order[p], order[q]], unit upper triangular
    let a = DMatrix::from_fn(n, n, |p, q| {
        let (i, j) = (order[p], order[q]);
        let id = if i == j { 1.0 } else { 0.0 };
        id - omega[(i, j)]
    });
    let mut inv_perm = DMatrix::zeros(n, n);
    for col in 0..n {
        // solve A x = e_col from the bottom up
        for p in (0..=col).rev() {
            let mut acc = if p == col { 1.0 } else { 0.0 };
            for q in p + 1..=col {
                acc -= a[(p, q)] * inv_perm[(q, col)];
            }
            inv_perm[(p, col)] = acc;
        }
    }
    let mut inverse = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            inverse[(order[p], order[q])] = inv_perm[(p, q)];
        }
    }
    check_condition(&a, &inv_perm)?;
    Ok(Resolvent { omega, inverse })
}

/// Nonzero entries of the source vector `γ*_uv` as `(neuron, value)`.
///
/// For a hidden or input neuron `u` and unsaturated neurons these are the
/// case-table entries:
/// `γ⁺`: `−1/(r_u+T⁻_u)` at `u` and `+1/(r_v+T⁻_v)` at `v` (`u ≠ v`), zero
/// when `u = v`;
/// `γ⁻`: `−1/(r_u+T⁻_u)` at `u`, `−ρ_v/(r_v+T⁻_v)` at `v` (`u ≠ v`), and
/// `−(1+ρ_u)/(r_u+T⁻_u)` when `u = v`.
fn gamma_entries(spec: &NetworkSpec, state: &ActivityState, sign: Sign, u: usize, v: usize) -> [(usize, f64); 2] {
    let at_v = match sign {
        Sign::Plus => 1.0 / capacity(spec, state, v),
        Sign::Minus => -state.rho[v] / capacity(spec, state, v),
    };
    let at_u = if spec.roles()[u].is_output() {
        0.0
    } else {
        -1.0 / capacity(spec, state, u)
    };
    let mask = |i: usize, x: f64| if state.is_saturated(i) { 0.0 } else { x };
    [(u, mask(u, at_u)), (v, mask(v, at_v))]
}

/// The vectors `(γ⁺_uv, γ⁻_uv)`.
pub fn gamma_vectors(
    spec: &NetworkSpec,
    state: &ActivityState,
    u: usize,
    v: usize,
) -> (DVector<f64>, DVector<f64>) {
    let n = spec.n();
    let mut out = (DVector::zeros(n), DVector::zeros(n));
    for (i, x) in gamma_entries(spec, state, Sign::Plus, u, v) {
        out.0[i] += x;
    }
    for (i, x) in gamma_entries(spec, state, Sign::Minus, u, v) {
        out.1[i] += x;
    }
    out
}

/// `∂ρ/∂w*_uv = ρ_u γ*_uv [I − Ω]⁻¹` (row vector times resolvent).
pub fn drho_dw(
    spec: &NetworkSpec,
    state: &ActivityState,
    resolvent: &Resolvent,
    sign: Sign,
    u: usize,
    v: usize,
) -> DVector<f64> {
    let n = spec.n();
    let mut out = DVector::zeros(n);
    let rho_u = state.rho[u];
    if rho_u == 0.0 {
        return out;
    }
    for (i, g) in gamma_entries(spec, state, sign, u, v) {
        if g != 0.0 {
            for j in 0..n {
                out[j] += rho_u * g * resolvent.inverse[(i, j)];
            }
        }
    }
    out
}

/// `Σ_i γ*_uv;i · x_i`, the building block of every weight derivative.
fn gamma_dot(spec: &NetworkSpec, state: &ActivityState, sign: Sign, u: usize, v: usize, x: impl Fn(usize) -> f64) -> f64 {
    gamma_entries(spec, state, sign, u, v)
        .iter()
        .map(|&(i, g)| if g == 0.0 { 0.0 } else { g * x(i) })
        .sum()
}

/// Gradient of `½ Σ_o (ρ_o − b_o)²` for one sample, in [`WeightIndex`]
/// order.
pub fn sample_gradient(
    spec: &NetworkSpec,
    state: &ActivityState,
    resolvent: &Resolvent,
    index: &WeightIndex,
    target: &[f64],
) -> DVector<f64> {
    let z = weighted_error(spec, state, resolvent, target);
    DVector::from_fn(index.len(), |m, _| {
        let (sign, u, v) = index.coordinate(m);
        state.rho[u] * gamma_dot(spec, state, sign, u, v, |i| z[i])
    })
}

/// `z = [I − Ω]⁻¹ · e'` with `e'_i = c_i (ρ_i − b_i)`.
pub fn weighted_error(
    spec: &NetworkSpec,
    state: &ActivityState,
    resolvent: &Resolvent,
    target: &[f64],
) -> DVector<f64> {
    let mut e = DVector::zeros(spec.n());
    for (o, &b) in spec.outputs().iter().zip(target) {
        e[*o] = state.rho[*o] - b;
    }
    &resolvent.inverse * e
}

/// Residuals, gradient and Jacobian of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    /// `E`: stacked `b⁽ᵏ⁾ − ρ⁽ᵏ⁾` over samples, output neurons in order.
    pub residual: DVector<f64>,
    /// `G = Jᵀ E`, the gradient of `½‖E‖²`.
    pub grad: DVector<f64>,
    /// `J_(s,m) = ∂E_s/∂w_m`, `S × M` with `S = K·O`.
    pub jacobian: DMatrix<f64>,
    pub weight_index: WeightIndex,
}

/// Jacobian rows `∂(b − ρ_o)/∂w` of one sample.
fn jacobian_rows(spec: &NetworkSpec, state: &ActivityState, index: &WeightIndex) -> Result<DMatrix<f64>> {
    let resolvent = build_omega(spec, state)?;
    Ok(jacobian_rows_with(spec, state, &resolvent, index))
}

fn jacobian_rows_with(
    spec: &NetworkSpec,
    state: &ActivityState,
    resolvent: &Resolvent,
    index: &WeightIndex,
) -> DMatrix<f64> {
    let outputs = spec.outputs();
    DMatrix::from_fn(outputs.len(), index.len(), |row, m| {
        let o = outputs[row];
        let (sign, u, v) = index.coordinate(m);
        -state.rho[u] * gamma_dot(spec, state, sign, u, v, |i| resolvent.inverse[(i, o)])
    })
}

/// Assembles `E`, `J` and `G = JᵀE` from solved states of every sample.
pub fn assemble_gradient(
    spec: &NetworkSpec,
    dataset: &Dataset,
    states: &[ActivityState],
) -> Result<DerivativeBundle> {
    let outputs = spec.outputs();
    let (k, o) = (dataset.len(), outputs.len());
    if states.len() != k {
        return Err(Error::Shape(format!("{} states for {k} samples", states.len())));
    }
    if dataset.n_targets() != o || dataset.n_inputs() != spec.inputs().len() {
        return Err(Error::Shape(format!(
            "dataset is {}->{} but network is {}->{o}",
            dataset.n_inputs(),
            dataset.n_targets(),
            spec.inputs().len()
        )));
    }
    let index = spec.weight_index();
    let blocks: Vec<DMatrix<f64>> = states
        .par_iter()
        .enumerate()
        .map(|(s, st)| {
            jacobian_rows(spec, st, &index).map_err(|e| Error::Sample { sample: s, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut jacobian = DMatrix::zeros(k * o, index.len());
    let mut residual = DVector::zeros(k * o);
    for (s, block) in blocks.iter().enumerate() {
        jacobian.rows_mut(s * o, o).copy_from(block);
        for (c, &out) in outputs.iter().enumerate() {
            residual[s * o + c] = dataset.targets()[(s, c)] - states[s].rho[out];
        }
    }
    let grad = jacobian.transpose() * &residual;
    Ok(DerivativeBundle { residual, grad, jacobian, weight_index: index })
}

/// Derivatives with respect to exogenous rates and output service rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDerivatives {
    /// `Δ`, diagonal with `Δ_ii = r_i + T⁻_i`.
    pub delta_mat: DMatrix<f64>,
    /// `P`, diagonal with `P_ii = ρ_i`.
    pub p_mat: DMatrix<f64>,
    /// `Λ⁺_(i,u) = ∂ρ_i/∂λ⁺_u`.
    pub lambda_plus_jac: DMatrix<f64>,
    /// `Λ⁻_(i,u) = ∂ρ_i/∂λ⁻_u`.
    pub lambda_minus_jac: DMatrix<f64>,
    /// `(i, u)` entry `∂ρ_i/∂r_u` for output neurons `u`, zero columns
    /// elsewhere.
    pub rate_jac: DMatrix<f64>,
    /// Direct term `∂ρ_u/∂r_u = −T⁺_u/(r_u + T⁻_u)²` per output neuron,
    /// zero elsewhere. Equals the diagonal of `rate_jac` when `u` feeds no
    /// other neuron.
    pub rate_grad: DVector<f64>,
}

/// Builds `Δ`, `P`, `Λ⁺`, `Λ⁻` and the output-rate derivatives.
///
/// Finite differences give `Λ⁺ = ([I−Ω]⁻¹)ᵀ Δ⁻¹` and
/// `Λ⁻ = −([I−Ω]⁻¹)ᵀ Δ⁻¹ P`: the source of `λ⁺_u` is `1/Δ_uu` at `u`, so
/// the scaling multiplies columns. The diagonal factors commute with the
/// transposed resolvent only when `Ω = 0`.
pub fn extended_derivatives(
    spec: &NetworkSpec,
    state: &ActivityState,
    resolvent: &Resolvent,
) -> ExtendedDerivatives {
    let n = spec.n();
    let cap = DVector::from_fn(n, |i, _| capacity(spec, state, i));
    let delta_mat = DMatrix::from_diagonal(&cap);
    let p_mat = DMatrix::from_diagonal(&state.rho);
    let rt = resolvent.inverse.transpose();
    let live = |u: usize| if state.is_saturated(u) { 0.0 } else { 1.0 };
    let mut lambda_plus_jac = rt.clone();
    let mut lambda_minus_jac = rt.clone();
    let mut rate_jac = DMatrix::zeros(n, n);
    let mut rate_grad = DVector::zeros(n);
    for u in 0..n {
        let plus = live(u) / cap[u];
        let minus = -live(u) * state.rho[u] / cap[u];
        lambda_plus_jac.column_mut(u).scale_mut(plus);
        lambda_minus_jac.column_mut(u).scale_mut(minus);
        if spec.roles()[u].is_output() {
            rate_jac.set_column(u, &(rt.column(u) * minus));
            rate_grad[u] = -live(u) * state.t_plus[u] / (cap[u] * cap[u]);
        }
    }
    ExtendedDerivatives { delta_mat, p_mat, lambda_plus_jac, lambda_minus_jac, rate_jac, rate_grad }
}

/// Loss criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Residual sum of squares over output neurons and samples.
    Rss,
    /// `RSS / K`.
    Mse,
}

/// Loss of `K×N` activities against `K×O` targets; only the columns listed
/// in `outputs` enter the sum.
pub fn loss(targets: &DMatrix<f64>, activities: &DMatrix<f64>, outputs: &[usize], kind: LossKind) -> Result<f64> {
    let k = targets.nrows();
    if k == 0 {
        return Err(Error::InvalidInput("loss of an empty dataset".into()));
    }
    if activities.nrows() != k || targets.ncols() != outputs.len() {
        return Err(Error::Shape(format!(
            "targets {}x{}, activities {}x{}, {} outputs",
            k,
            targets.ncols(),
            activities.nrows(),
            activities.ncols(),
            outputs.len()
        )));
    }
    if let Some(&o) = outputs.iter().find(|&&o| o >= activities.ncols()) {
        return Err(Error::Shape(format!("output neuron {o} outside activity matrix")));
    }
    let mut rss = 0.0;
    for s in 0..k {
        for (c, &o) in outputs.iter().enumerate() {
            let e = targets[(s, c)] - activities[(s, o)];
            rss += e * e;
        }
    }
    Ok(match kind {
        LossKind::Rss => rss,
        LossKind::Mse => rss / k as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Role;
    use crate::solve::{solve, solve_feedforward};

    fn chain() -> NetworkSpec {
        let mut wp = DMatrix::zeros(3, 3);
        let mut wm = DMatrix::zeros(3, 3);
        wp[(0, 1)] = 1.0;
        wm[(0, 1)] = 1.0;
        wp[(1, 2)] = 2.0;
        NetworkSpec::from_parts(
            vec![Role::Input, Role::Hidden, Role::Output],
            vec![(0, 1), (1, 2)],
            wp,
            wm,
            DVector::from_element(3, 1.0),
            DVector::zeros(3),
            DVector::zeros(3),
        )
        .unwrap()
    }

    fn mutual_loop() -> NetworkSpec {
        NetworkSpec::from_parts(
            vec![Role::InputOutput, Role::InputOutput],
            vec![(0, 1), (1, 0)],
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DMatrix::zeros(2, 2),
            DVector::from_element(2, 2.0),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap()
    }

    /// Central difference of the full solve (rates re-derived) in `w*_uv`.
    fn fd_drho(spec: &NetworkSpec, input: &[f64], sign: Sign, u: usize, v: usize, h: f64) -> DVector<f64> {
        let eval = |delta: f64| {
            let mut s = spec.clone();
            let m = s.weight_index().position(sign, u, v).unwrap();
            let mut w = s.weights_flat();
            w[m] += delta;
            s.set_weights_flat(&w).unwrap();
            solve(&s, input).unwrap().rho
        };
        let w = spec.weights_flat()[spec.weight_index().position(sign, u, v).unwrap()];
        if w < h {
            // one-sided second-order difference at the boundary
            (eval(h) * 4.0 - eval(2.0 * h) - eval(0.0) * 3.0) / (2.0 * h)
        } else {
            (eval(h) - eval(-h)) / (2.0 * h)
        }
    }

    #[test]
    fn zero_weights_give_identity_resolvent() {
        // two isolated output neurons
        let spec = NetworkSpec::from_parts(
            vec![Role::InputOutput, Role::Output],
            vec![(0, 1)],
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DVector::from_element(2, 1.0),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        let st = solve(&spec, &[0.3]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        assert_eq!(r.omega, DMatrix::zeros(2, 2));
        assert_eq!(r.inverse, DMatrix::identity(2, 2));
    }

    #[test]
    fn chain_omega_is_strictly_upper_triangular() {
        let spec = chain();
        let st = solve_feedforward(&spec, &[0.5]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        // Omega_12 = (1 - 1*rho2)/(r2 + T-2), T-2 = rho1 * 1 = 0.25
        let rho2 = 1.0 / 9.0;
        assert!((r.omega[(0, 1)] - (1.0 - rho2) / 2.25).abs() < 1e-15);
        // Omega_23 = 2 / (1 + 0)
        assert_eq!(r.omega[(1, 2)], 2.0);
        for i in 0..3 {
            for j in 0..=i {
                assert_eq!(r.omega[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn loop_resolvent_matches_closed_form() {
        let spec = mutual_loop();
        let st = solve(&spec, &[0.2, 0.2]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        // Omega = [[0, a], [a, 0]] with a = 1/2; inverse of [[1,-a],[-a,1]]
        let a = r.omega[(0, 1)];
        assert!((a - 0.5).abs() < 1e-12);
        let det = 1.0 - a * a;
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 / det, a / det, a / det, 1.0 / det]);
        assert!((&r.inverse - expected).amax() < 1e-12);
    }

    #[test]
    fn gamma_case_table() {
        let spec = chain();
        let st = solve_feedforward(&spec, &[0.5]).unwrap();
        let (gp, gm) = gamma_vectors(&spec, &st, 1, 1);
        assert!(gp.iter().all(|&x| x == 0.0));
        let cap1 = spec.rates()[1] + st.t_minus[1];
        assert!((gm[1] + (1.0 + st.rho[1]) / cap1).abs() < 1e-15);
        assert_eq!(gm.iter().filter(|&&x| x != 0.0).count(), 1);

        let (gp, gm) = gamma_vectors(&spec, &st, 0, 1);
        let cap0 = spec.rates()[0] + st.t_minus[0];
        assert_eq!(gp.iter().filter(|&&x| x != 0.0).count(), 2);
        assert!((gp[0] + 1.0 / cap0).abs() < 1e-15);
        assert!((gp[1] - 1.0 / cap1).abs() < 1e-15);
        assert!((gm[0] + 1.0 / cap0).abs() < 1e-15);
        assert!((gm[1] + st.rho[1] / cap1).abs() < 1e-15);
    }

    #[test]
    fn zero_source_activity_gives_zero_derivative() {
        let spec = chain();
        let st = solve_feedforward(&spec, &[0.0]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        assert!(drho_dw(&spec, &st, &r, Sign::Plus, 1, 2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn chain_derivative_matches_finite_differences() {
        let spec = chain();
        let st = solve_feedforward(&spec, &[0.5]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        for (sign, u, v) in [(Sign::Plus, 1, 2), (Sign::Plus, 0, 1), (Sign::Minus, 0, 1), (Sign::Minus, 1, 2)] {
            let analytic = drho_dw(&spec, &st, &r, sign, u, v);
            let fd = fd_drho(&spec, &[0.5], sign, u, v, 1e-6);
            for i in 0..3 {
                let tol = (1e-5 * fd[i].abs()).max(1e-9);
                assert!((analytic[i] - fd[i]).abs() <= tol, "{sign:?} {u}->{v} component {i}: {} vs {}", analytic[i], fd[i]);
            }
        }
        let d = drho_dw(&spec, &st, &r, Sign::Plus, 1, 2);
        assert!(d[2] > 0.0);
        // upstream components of a downstream weight vanish
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn output_weight_derivative_in_loop_matches_finite_differences() {
        // output neurons with outgoing weights keep their rate fixed
        let spec = mutual_loop();
        let st = solve(&spec, &[0.2, 0.3]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        for (sign, u, v) in [(Sign::Plus, 0, 1), (Sign::Minus, 1, 0)] {
            let analytic = drho_dw(&spec, &st, &r, sign, u, v);
            let fd = fd_drho(&spec, &[0.2, 0.3], sign, u, v, 1e-6);
            assert!((&analytic - &fd).amax() < 1e-8, "{analytic} vs {fd}");
        }
    }

    #[test]
    fn triangular_and_dense_paths_agree() {
        let spec = chain();
        let st = solve_feedforward(&spec, &[0.7]).unwrap();
        let tri = build_omega(&spec, &st).unwrap();
        let dense = build_omega_dense(&spec, &st).unwrap();
        assert!((&tri.inverse - &dense.inverse).amax() <= 1e-12);
    }

    #[test]
    fn extended_zero_weights_is_diagonal() {
        let mut lm = DVector::zeros(2);
        lm[1] = 0.5;
        let spec = NetworkSpec::from_parts(
            vec![Role::InputOutput, Role::Output],
            vec![(0, 1)],
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![0.0, 0.1]),
            lm,
        )
        .unwrap();
        let st = solve(&spec, &[0.3]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        let ext = extended_derivatives(&spec, &st, &r);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 / 2.5]));
        assert!((&ext.lambda_plus_jac - expected).amax() < 1e-15);
    }

    #[test]
    fn rate_derivative_vanishes_without_inflow() {
        let spec = chain();
        let st = solve_feedforward(&spec, &[0.0]).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        let ext = extended_derivatives(&spec, &st, &r);
        assert_eq!(ext.rate_grad[2], 0.0);
    }

    #[test]
    fn loop_lambda_derivatives_match_finite_differences() {
        let spec = mutual_loop();
        let input = [0.2, 0.3];
        let st = solve(&spec, &input).unwrap();
        let r = build_omega(&spec, &st).unwrap();
        let ext = extended_derivatives(&spec, &st, &r);
        let h = 1e-6;
        for u in 0..2 {
            // lambda+ of input neurons is the pattern itself
            let mut up = input;
            let mut dn = input;
            up[u] += h;
            dn[u] -= h;
            let fd = (solve(&spec, &up).unwrap().rho - solve(&spec, &dn).unwrap().rho) / (2.0 * h);
            assert!((ext.lambda_plus_jac.column(u) - &fd).amax() < 1e-8);

            let eval = |d: f64| {
                let mut s = spec.clone();
                s.set_lambda_minus(u, d.max(0.0)).unwrap();
                solve(&s, &input).unwrap().rho
            };
            let fd = (eval(h) - eval(0.0)) / h;
            // one-sided at lambda- = 0, so compare loosely
            assert!((ext.lambda_minus_jac.column(u) - &fd).amax() < 1e-5);
            assert!(ext.lambda_minus_jac.column(u).iter().all(|&x| x <= 0.0));
        }
    }

    #[test]
    fn loss_values() {
        let targets = DMatrix::from_row_slice(2, 1, &[0.5, 0.5]);
        let acts = DMatrix::from_row_slice(2, 2, &[0.9, 0.4, 0.1, 0.2]);
        // errors 0.1 and 0.3 on output column 1
        let rss = loss(&targets, &acts, &[1], LossKind::Rss).unwrap();
        let mse = loss(&targets, &acts, &[1], LossKind::Mse).unwrap();
        assert!((rss - 0.10).abs() < 1e-15);
        assert!((mse - 0.05).abs() < 1e-15);
        // hidden column changes do not matter
        let mut other = acts.clone();
        other[(0, 0)] = 0.0;
        assert_eq!(loss(&targets, &other, &[1], LossKind::Rss).unwrap(), rss);
        let exact = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(loss(&targets, &exact, &[1], LossKind::Mse).unwrap(), 0.0);
        assert!(loss(&DMatrix::zeros(0, 1), &DMatrix::zeros(0, 2), &[1], LossKind::Mse).is_err());
    }
}
