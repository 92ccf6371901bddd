//! Mapping a classical feedforward network onto a random neural network.
//!
//! A signed weight `w_uv` becomes an excitatory weight when positive and an
//! inhibitory one of magnitude `|w_uv|` when negative. Thresholds become
//! exogenous signals: a positive threshold is a steady inhibitory flow
//! `λ⁻ = θ`, a negative one an excitatory flow `λ⁺ = |θ|`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Role};

/// Result of [`convert_ann`]: the network and the caller's decode
/// cut-points, one per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnConversion {
    pub spec: NetworkSpec,
    pub cut_points: Vec<f64>,
}

/// Converts signed weights `ann_weights[(u, v)]` (connection `u → v`) and
/// thresholds into a network.
///
/// Output neurons must have no outgoing connections (`d = 1`); their rate
/// is `output_rate`. Input and hidden rates follow from `Σ_v |w_uv|`.
///
/// ```
/// use nalgebra::{DMatrix, DVector};
/// use gnet_core::ann::convert_ann;
/// use gnet_core::network::Role;
///
/// let w = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.0, 0.0]);
/// let conv = convert_ann(&w, &DVector::zeros(2), vec![Role::Input, Role::Output], 1.0, vec![0.5]).unwrap();
/// assert_eq!(conv.spec.w_minus()[(0, 1)], 0.5);
/// assert_eq!(conv.spec.w_plus()[(0, 1)], 0.0);
/// ```
pub fn convert_ann(
    ann_weights: &DMatrix<f64>,
    thresholds: &DVector<f64>,
    roles: Vec<Role>,
    output_rate: f64,
    cut_points: Vec<f64>,
) -> Result<AnnConversion> {
    let n = roles.len();
    if ann_weights.shape() != (n, n) || thresholds.len() != n {
        return Err(Error::Shape(format!(
            "weights {:?} and {} thresholds for {n} neurons",
            ann_weights.shape(),
            thresholds.len()
        )));
    }
    let outputs = roles.iter().filter(|r| r.is_output()).count();
    if cut_points.len() != outputs {
        return Err(Error::Shape(format!("{} cut-points for {outputs} output neurons", cut_points.len())));
    }
    let mut w_plus = DMatrix::zeros(n, n);
    let mut w_minus = DMatrix::zeros(n, n);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let w = ann_weights[(u, v)];
            if !w.is_finite() {
                return Err(Error::InvalidParameter(format!("weight ({u}, {v}) is not finite")));
            }
            if w == 0.0 {
                continue;
            }
            if roles[u].is_output() {
                return Err(Error::Topology(format!(
                    "output neuron {u} has an outgoing connection to {v}"
                )));
            }
            edges.push((u, v));
            if w > 0.0 {
                w_plus[(u, v)] = w;
            } else {
                w_minus[(u, v)] = -w;
            }
        }
    }
    let mut lambda_plus = DVector::zeros(n);
    let mut lambda_minus = DVector::zeros(n);
    for (i, &theta) in thresholds.iter().enumerate() {
        if theta > 0.0 {
            lambda_minus[i] = theta;
        } else if theta < 0.0 {
            if roles[i].is_input() {
                // the pattern overwrites λ⁺ of input neurons
                return Err(Error::InvalidParameter(format!(
                    "input neuron {i} cannot carry a negative threshold"
                )));
            }
            lambda_plus[i] = -theta;
        }
    }
    let spec = NetworkSpec::from_parts(
        roles,
        edges,
        w_plus,
        w_minus,
        DVector::from_element(n, output_rate),
        lambda_plus,
        lambda_minus,
    )?;
    if !spec.is_feedforward() {
        return Err(Error::Topology("classical network must be feedforward".into()));
    }
    Ok(AnnConversion { spec, cut_points })
}

/// Binary decision `y = 1 ⇔ ρ > 1 − α`.
pub fn decode_binary(rho: f64, alpha: f64) -> bool {
    rho > 1.0 - alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles3() -> Vec<Role> {
        vec![Role::Input, Role::Hidden, Role::Output]
    }

    #[test]
    fn rates_are_absolute_sums() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 0.3;
        w[(0, 2)] = 0.7;
        w[(1, 2)] = -0.4;
        let conv = convert_ann(&w, &DVector::zeros(3), roles3(), 2.0, vec![0.5]).unwrap();
        assert!((conv.spec.rates()[0] - 1.0).abs() < 1e-15);
        assert!((conv.spec.rates()[1] - 0.4).abs() < 1e-15);
        assert_eq!(conv.spec.rates()[2], 2.0);
        assert_eq!(conv.spec.departure()[2], 1.0);
        assert_eq!(conv.spec.w_minus()[(1, 2)], 0.4);
    }

    #[test]
    fn zero_hidden_row_is_degenerate() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        let err = convert_ann(&w, &DVector::zeros(3), roles3(), 1.0, vec![0.5]).unwrap_err();
        assert_eq!(err, Error::DegenerateNeuron { neuron: 1 });
    }

    #[test]
    fn thresholds_become_exogenous_signals() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 2)] = 1.0;
        let conv = convert_ann(&w, &DVector::from_vec(vec![0.0, 0.2, -0.3]), roles3(), 1.0, vec![0.5]).unwrap();
        assert_eq!(conv.spec.lambda_minus()[1], 0.2);
        assert_eq!(conv.spec.lambda_plus()[2], 0.3);
    }

    #[test]
    fn cycles_and_output_fanout_rejected() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(1, 2)] = 1.0;
        assert!(matches!(
            convert_ann(&w, &DVector::zeros(3), roles3(), 1.0, vec![0.5]),
            Err(Error::Topology(_))
        ));
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 2)] = 1.0;
        w[(2, 1)] = 1.0;
        assert!(matches!(
            convert_ann(&w, &DVector::zeros(3), roles3(), 1.0, vec![0.5]),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn decoding() {
        assert!(decode_binary(0.8, 0.3));
        assert!(!decode_binary(0.6, 0.3));
    }
}
