use nalgebra::DVector;

/// Sufficient-decrease constant of the backtracking rule.
pub const ARMIJO_C: f64 = 1e-4;
/// Maximum number of halvings.
pub const MAX_HALVINGS: u32 = 20;

/// Backtracking line search.
///
/// Starting from `α = 1` the step is halved until
/// `f(w + αδ) ≤ f(w) − 1e−4·α·|gᵀδ|`. Returns `0` when `δ` is not a
/// descent direction or no `α` passes after 20 halvings; failed
/// evaluations count as no decrease.
///
/// ```
/// use nalgebra::DVector;
/// use gnet_core::optim::line_search;
///
/// let f = |w: &DVector<f64>| Ok(w[0] * w[0]);
/// let w = DVector::from_vec(vec![1.0]);
/// let g = DVector::from_vec(vec![2.0]);
/// let alpha = line_search(f, &w, 1.0, &g, &DVector::from_vec(vec![-4.0])).unwrap();
/// assert_eq!(alpha, 0.25);
/// ```
pub fn line_search<F>(mut f: F, w: &DVector<f64>, f0: f64, g: &DVector<f64>, delta: &DVector<f64>) -> crate::Result<f64>
where
    F: FnMut(&DVector<f64>) -> crate::Result<f64>,
{
    let slope = g.dot(delta);
    if !(slope < 0.0) {
        return Ok(0.0);
    }
    let mut alpha = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let trial = w + delta * alpha;
        if let Ok(ft) = f(&trial) {
            if ft <= f0 - ARMIJO_C * alpha * slope.abs() {
                return Ok(alpha);
            }
        }
        alpha *= 0.5;
    }
    Ok(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_step_on_quadratic_is_accepted() {
        // f = (w - 3)^2, w = 0, g = -6, Newton step 3
        let f = |w: &DVector<f64>| Ok((w[0] - 3.0).powi(2));
        let a = line_search(f, &DVector::from_vec(vec![0.0]), 9.0, &DVector::from_vec(vec![-6.0]), &DVector::from_vec(vec![3.0]));
        assert_eq!(a.unwrap(), 1.0);
    }

    #[test]
    fn ascent_direction_signals_zero() {
        let f = |w: &DVector<f64>| Ok(w[0] * w[0]);
        let a = line_search(f, &DVector::from_vec(vec![1.0]), 1.0, &DVector::from_vec(vec![2.0]), &DVector::from_vec(vec![1.0]));
        assert_eq!(a.unwrap(), 0.0);
    }
}
