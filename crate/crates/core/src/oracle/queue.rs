use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// `P(k customers) = ϱᵏ(1 − ϱ)` of an M/M/1 queue with `ϱ = λ/r`.
///
/// ```
/// # use gnet_core::oracle::mm1_steady_state;
/// assert_eq!(mm1_steady_state(1.0, 2.0, 1).unwrap(), 0.25);
/// ```
pub fn mm1_steady_state(lambda: f64, r: f64, k: u32) -> Result<f64> {
    if !(lambda >= 0.0) || !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("need λ >= 0 and r > 0, got λ = {lambda}, r = {r}")));
    }
    let rho = lambda / r;
    if rho >= 1.0 {
        return Err(Error::NonErgodic { utilization: rho });
    }
    Ok(rho.powi(k as i32) * (1.0 - rho))
}

/// Throughputs of an open Jackson network: the solution of
/// `T = λ⁺ + Pᵀ T` with `P` the positive routing matrix.
///
/// The network must carry no negative customers. Every queue must be fed
/// by some exogenous stream and drain out of the network; otherwise the
/// system is singular or some throughput is zero, and an error is
/// returned.
pub fn jackson_throughput(spec: &NetworkSpec) -> Result<DVector<f64>> {
    if spec.w_minus().iter().any(|&w| w != 0.0) || spec.lambda_minus().iter().any(|&l| l != 0.0) {
        return Err(Error::InvalidInput("Jackson network must not carry negative customers".into()));
    }
    if !spec.lambda_plus().iter().any(|&l| l > 0.0) {
        return Err(Error::InvalidInput("at least one exogenous arrival rate must be positive".into()));
    }
    let n = spec.n();
    let a = DMatrix::identity(n, n) - spec.routing_plus().transpose();
    let lu = a.lu();
    let t = lu
        .solve(spec.lambda_plus())
        .ok_or_else(|| Error::SingularSystem("flow equations are singular: no path out of the network".into()))?;
    if let Some(i) = t.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::SingularSystem(format!(
            "queue {i} has throughput {}: it is not reached by any arrival stream",
            t[i]
        )));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn queueing(wp: &[f64], rates: &[f64], lambda: &[f64]) -> NetworkSpec {
        let n = rates.len();
        NetworkSpec::from_queueing(
            DMatrix::from_row_slice(n, n, wp),
            DMatrix::zeros(n, n),
            DVector::from_row_slice(rates),
            DVector::from_row_slice(lambda),
            DVector::zeros(n),
        )
        .unwrap()
    }

    #[test]
    fn mm1_values() {
        assert_eq!(mm1_steady_state(1.0, 2.0, 0).unwrap(), 0.5);
        assert_eq!(mm1_steady_state(1.0, 2.0, 1).unwrap(), 0.25);
        assert!(matches!(mm1_steady_state(2.0, 2.0, 0), Err(Error::NonErgodic { .. })));
    }

    #[test]
    fn tandem() {
        // p12 = 1 with r1 = 3: w12 = 3
        let spec = queueing(&[0.0, 3.0, 0.0, 0.0], &[3.0, 2.0], &[1.0, 0.0]);
        let t = jackson_throughput(&spec).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-14 && (t[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_queue() {
        let spec = queueing(&[0.0], &[5.0], &[2.0]);
        assert!((jackson_throughput(&spec).unwrap()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn feedback_pair() {
        // p12 = 1, p21 = 0.5, d2 = 0.5, λ1 = 1 → T = (2, 2)
        let spec = queueing(&[0.0, 4.0, 2.0, 0.0], &[4.0, 4.0], &[1.0, 0.0]);
        let t = jackson_throughput(&spec).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-12 && (t[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreached_queue_is_rejected() {
        let spec = queueing(&[0.0, 0.0, 0.0, 0.0], &[1.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(jackson_throughput(&spec), Err(Error::SingularSystem(_))));
    }
}
