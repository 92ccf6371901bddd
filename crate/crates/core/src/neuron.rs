//! The single random neuron seen as an input-output device.

use crate::error::{Error, Result};

/// Output of one random neuron together with its saturation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronOutput {
    pub value: f64,
    /// Set when the excitatory input reaches `r + y`.
    pub saturated: bool,
}

/// Evaluates a random neuron with excitatory input `x`, inhibitory input `y`
/// and service rate `r`.
///
/// Uncontrolled neurons return `x·r/(r+y)`. Controlled neurons cap the load
/// `x/(r+y)` at one, so their output never exceeds `r`.
///
/// ```
/// use gnet_core::neuron::neuron_output;
/// let out = neuron_output(10.0, 0.0, 2.0, true).unwrap();
/// assert_eq!(out.value, 2.0);
/// assert!(out.saturated);
/// ```
pub fn neuron_output(x: f64, y: f64, r: f64, controlled: bool) -> Result<NeuronOutput> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("service rate must be > 0, got {r}")));
    }
    if !(x >= 0.0) || !(y >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "neuron inputs must be non-negative, got x = {x}, y = {y}"
        )));
    }
    let load = x / (r + y);
    let saturated = x >= r + y;
    let value = if controlled { load.min(1.0) * r } else { load * r };
    Ok(NeuronOutput { value, saturated })
}
