mod common;

use common::*;
use gnet_core::network::{NetworkSpec, Role, Sign};
use gnet_core::solve::{solve, solve_feedforward, solve_fixed_point, solve_fixed_point_from, FixedPointOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn explicit_sweep_equals_fixed_point_on_100_acyclic_networks() {
    let mut rng = rng(11);
    let tight = FixedPointOptions { tol: 1e-14, ..Default::default() };
    for _ in 0..100 {
        let spec = random_feedforward(&mut rng, 10);
        let x: Vec<f64> = (0..spec.inputs().len()).map(|_| rng.random::<f64>()).collect();
        let a = solve_feedforward(&spec, &x).unwrap();
        let b = solve_fixed_point(&spec, &x, &tight).unwrap();
        assert!((&a.rho - &b.rho).amax() <= 1e-10);
    }
}

#[test]
fn solution_satisfies_the_balance_equations() {
    let mut rng = rng(12);
    for _ in 0..30 {
        let spec = random_recurrent(&mut rng, 6);
        let x: Vec<f64> = (0..spec.inputs().len()).map(|_| rng.random::<f64>()).collect();
        let s = solve(&spec, &x).unwrap();
        let lp = spec.effective_lambda_plus(&x).unwrap();
        for i in 0..spec.n() {
            let tp = lp[i] + (0..spec.n()).map(|j| s.rho[j] * spec.w_plus()[(j, i)]).sum::<f64>();
            let tm = spec.lambda_minus()[i] + (0..spec.n()).map(|j| s.rho[j] * spec.w_minus()[(j, i)]).sum::<f64>();
            assert!((s.rho[i] * (spec.rates()[i] + tm) - tp).abs() < 1e-9);
            assert!((s.t_plus[i] - tp).abs() < 1e-12 && (s.t_minus[i] - tm).abs() < 1e-12);
        }
        assert!(s.residual < 1e-9);
        assert!(spec.row_defect() < 1e-12);
    }
}

#[test]
fn restarting_from_the_solution_is_idempotent() {
    let mut rng = rng(13);
    let opts = FixedPointOptions { tol: 1e-13, ..Default::default() };
    for _ in 0..20 {
        let spec = random_recurrent(&mut rng, 6);
        let x: Vec<f64> = (0..spec.inputs().len()).map(|_| rng.random::<f64>()).collect();
        let a = solve_fixed_point(&spec, &x, &opts).unwrap();
        let b = solve_fixed_point_from(&spec, &x, &a.rho, &opts).unwrap();
        assert!((&a.rho - &b.rho).amax() < 1e-12);
    }
}

fn excitatory_only(spec: &NetworkSpec) -> NetworkSpec {
    let n = spec.n();
    let mut wp = spec.w_plus().clone();
    // keep the rates by moving inhibitory mass onto the excitatory weights
    wp += spec.w_minus();
    let rates = spec.rates().clone();
    NetworkSpec::from_parts(
        spec.roles().to_vec(),
        spec.edges().to_vec(),
        wp,
        DMatrix::zeros(n, n),
        rates,
        DVector::zeros(n),
        DVector::zeros(n),
    )
    .unwrap()
}

#[test]
fn more_input_never_lowers_activity_without_inhibition() {
    let mut rng = rng(14);
    for _ in 0..50 {
        let spec = excitatory_only(&random_feedforward(&mut rng, 10));
        let mut x: Vec<f64> = (0..spec.inputs().len()).map(|_| rng.random_range(0.0..0.5)).collect();
        let before = solve(&spec, &x).unwrap().rho;
        let k = rng.random_range(0..x.len());
        x[k] += 0.3;
        let after = solve(&spec, &x).unwrap().rho;
        assert!(after.iter().zip(before.iter()).all(|(a, b)| a >= b));
    }
}

#[test]
fn inhibition_can_lower_activity() {
    // input 0 inhibits the output, input 1 excites it
    let mut wp = DMatrix::zeros(3, 3);
    let mut wm = DMatrix::zeros(3, 3);
    wm[(0, 2)] = 1.0;
    wp[(1, 2)] = 1.0;
    let spec = NetworkSpec::from_parts(
        vec![Role::Input, Role::Input, Role::Output],
        vec![(0, 2), (1, 2)],
        wp,
        wm,
        DVector::from_element(3, 1.0),
        DVector::zeros(3),
        DVector::zeros(3),
    )
    .unwrap();
    let low = solve(&spec, &[0.1, 0.5]).unwrap().rho[2];
    let high = solve(&spec, &[0.9, 0.5]).unwrap().rho[2];
    assert!(high < low);
}

#[test]
fn hand_chain() {
    let mut spec = NetworkSpec::layered(&[1, 1, 1], 1.0, || 1.0).unwrap();
    spec.set_weight(Sign::Plus, 1, 2, 2.0).unwrap();
    spec.set_weight(Sign::Minus, 1, 2, 0.0).unwrap();
    let s = solve(&spec, &[0.5]).unwrap();
    assert!((s.rho[0] - 0.25).abs() < 1e-15);
    assert!((s.rho[1] - 1.0 / 9.0).abs() < 1e-15);
    assert!((s.rho[2] - 2.0 / 9.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn activities_stay_in_unit_interval(seed in any::<u64>(), x in proptest::collection::vec(0.0f64..5.0, 3)) {
        let mut rng = rng(seed);
        let spec = random_feedforward(&mut rng, 10);
        let x = &x[..spec.inputs().len().min(3)];
        if x.len() == spec.inputs().len() {
            let s = solve(&spec, x).unwrap();
            prop_assert!(s.rho.iter().all(|&r| (0.0..=1.0).contains(&r)));
            for &i in &s.saturated {
                prop_assert_eq!(s.rho[i], 1.0);
            }
        }
    }
}
