mod common;

use std::time::Instant;

use common::*;
use gnet_core::deriv::{assemble_gradient, build_omega, build_omega_dense, extended_derivatives};
use gnet_core::network::NetworkSpec;
use gnet_core::optim::{extended_gradient, online_gradient, solve_all};
use gnet_core::oracle::{finite_diff_gradient, FdTarget};
use gnet_core::solve::{solve_fixed_point, FixedPointOptions};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const REL: f64 = 1e-5;
const ABS: f64 = 1e-8;

fn instance(seed: u64) -> (NetworkSpec, gnet_core::data::Dataset) {
    let mut rng = rng(seed);
    let spec = if seed % 2 == 0 { random_feedforward(&mut rng, 10) } else { random_recurrent(&mut rng, 7) };
    let data = random_dataset(&mut rng, &spec, 3);
    (spec, data)
}

fn assert_close(what: &str, seed: u64, fd: &DVector<f64>, an: &DVector<f64>, skip: impl Fn(usize) -> bool) {
    for m in 0..fd.len() {
        if skip(m) {
            continue;
        }
        assert!(close(an[m], fd[m], REL, ABS), "seed {seed} {what}[{m}]: analytic {} vs fd {}", an[m], fd[m]);
    }
}

#[test]
fn analytic_gradients_match_finite_differences_on_50_networks() {
    let start = Instant::now();
    for seed in 0..50 {
        let (spec, data) = instance(seed);
        let states = solve_all(&spec, &data).unwrap();
        let bundle = assemble_gradient(&spec, &data, &states).unwrap();
        let fd = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::Weights).unwrap();
        assert_close("w", seed, &fd, &bundle.grad, |_| false);

        let n = spec.n();
        let (mut gp, mut gm, mut gr) = (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
        for k in 0..data.len() {
            let (_, p, m, r) = extended_gradient(&spec, &data.input_row(k), &data.target_row(k)).unwrap();
            gp += p;
            gm += m;
            gr += r;
        }
        let inputs = spec.inputs();
        let fd_p = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::LambdaPlus).unwrap();
        assert_close("λ+", seed, &fd_p, &gp, |u| inputs.contains(&u));
        let fd_m = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::LambdaMinus).unwrap();
        assert_close("λ-", seed, &fd_m, &gm, |_| false);
        let fd_r = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::OutputRates).unwrap();
        assert_close("r", seed, &fd_r, &gr, |u| !spec.roles()[u].is_output());
    }
    assert!(start.elapsed().as_secs() < 60, "took {:?}", start.elapsed());
}

#[test]
fn batch_gradient_is_sum_of_sample_gradients() {
    for seed in 0..10 {
        let (spec, data) = instance(seed);
        let bundle = assemble_gradient(&spec, &data, &solve_all(&spec, &data).unwrap()).unwrap();
        let mut sum = DVector::zeros(bundle.grad.len());
        for k in 0..data.len() {
            sum += online_gradient(&spec, &data.input_row(k), &data.target_row(k)).unwrap();
        }
        assert!((&sum - &bundle.grad).amax() < 1e-12);
        assert!((bundle.jacobian.transpose() * &bundle.residual - &bundle.grad).amax() < 1e-14);
    }
}

#[test]
fn resolvent_inverts_i_minus_omega() {
    for seed in 0..20 {
        let (spec, data) = instance(seed);
        let state = gnet_core::solve::solve(&spec, &data.input_row(0)).unwrap();
        let res = build_omega(&spec, &state).unwrap();
        let n = spec.n();
        let id = DMatrix::<f64>::identity(n, n);
        assert!(((&id - &res.omega) * &res.inverse - &id).amax() < 1e-10);
    }
}

#[test]
fn triangular_and_dense_resolvents_agree_on_feedforward_networks() {
    let mut rng = rng(21);
    for _ in 0..30 {
        let spec = random_feedforward(&mut rng, 10);
        let x: Vec<f64> = (0..spec.inputs().len()).map(|_| rng.random::<f64>()).collect();
        let state = gnet_core::solve::solve(&spec, &x).unwrap();
        let a = build_omega(&spec, &state).unwrap();
        let b = build_omega_dense(&spec, &state).unwrap();
        assert!((&a.inverse - &b.inverse).amax() <= 1e-12);
    }
}

#[test]
fn rate_jacobians_match_finite_differences() {
    let tight = FixedPointOptions { tol: 1e-15, max_iter: 1_000_000, damping: 0.0 };
    for seed in [1u64, 3, 5, 7] {
        let (spec, data) = instance(seed);
        let x = data.input_row(0);
        let state = solve_fixed_point(&spec, &x, &tight).unwrap();
        let ext = extended_derivatives(&spec, &state, &build_omega(&spec, &state).unwrap());
        let h = 1e-6;
        let rho = |s: &NetworkSpec| solve_fixed_point(s, &x, &tight).unwrap().rho;
        for u in 0..spec.n() {
            if spec.inputs().contains(&u) {
                continue;
            }
            let (mut up, mut dn) = (spec.clone(), spec.clone());
            up.set_lambda_plus(u, spec.lambda_plus()[u] + h).unwrap();
            dn.set_lambda_plus(u, spec.lambda_plus()[u] + 2.0 * h).unwrap();
            // one-sided second order: λ⁺ starts at zero
            let col = (rho(&up) * 4.0 - rho(&dn) - rho(&spec) * 3.0) / (2.0 * h);
            for i in 0..spec.n() {
                assert!(close(ext.lambda_plus_jac[(i, u)], col[i], REL, ABS), "Λ+ ({i},{u})");
            }
            if spec.roles()[u].is_output() {
                let r = spec.rates()[u];
                let (mut up, mut dn) = (spec.clone(), spec.clone());
                up.set_output_rate(u, r + h).unwrap();
                dn.set_output_rate(u, r - h).unwrap();
                let col = (rho(&up) - rho(&dn)) / (2.0 * h);
                for i in 0..spec.n() {
                    assert!(close(ext.rate_jac[(i, u)], col[i], REL, ABS), "∂ρ/∂r ({i},{u})");
                }
                assert!(ext.rate_jac[(u, u)] <= 0.0);
            }
        }
    }
}

#[test]
fn halving_the_step_barely_moves_the_estimate() {
    for seed in [0u64, 2, 4, 6, 8] {
        let (spec, data) = instance(seed);
        let a = finite_diff_gradient(&spec, &data, 1e-5, FdTarget::Weights).unwrap();
        let b = finite_diff_gradient(&spec, &data, 1e-6, FdTarget::Weights).unwrap();
        assert!((&a - &b).amax() < 1e-6);
    }
}
