use nalgebra::DVector;

use super::config::NonNegPolicy;

/// Maximum number of step halvings tried by [`NonNegPolicy::ShrinkEta`].
pub const MAX_SHRINK: u32 = 20;

/// One coordinate update `w_old + delta` under a policy.
///
/// `frozen` is the per-coordinate state of [`NonNegPolicy::FreezeZero`]; it
/// is set when the weight is clamped and never cleared. For
/// [`NonNegPolicy::BetaSquare`] `delta` is the raw step in weight space and
/// the update is the one induced on `θ = √w`:
/// `θ ← θ(1 + 2·delta)`, that is `w ← w(1 + 2·delta)²`.
pub fn apply_nonneg_policy(w_old: f64, delta: f64, policy: NonNegPolicy, frozen: &mut bool) -> f64 {
    match policy {
        NonNegPolicy::ClipZero => (w_old + delta).max(0.0),
        NonNegPolicy::FreezeZero => {
            if *frozen {
                return 0.0;
            }
            let w = w_old + delta;
            if w <= 0.0 {
                *frozen = true;
                0.0
            } else {
                w
            }
        }
        NonNegPolicy::ShrinkEta => {
            let mut step = delta;
            for _ in 0..=MAX_SHRINK {
                let w = w_old + step;
                if w >= 0.0 {
                    return w;
                }
                step *= 0.5;
            }
            0.0
        }
        NonNegPolicy::BetaSquare => {
            let f = 1.0 + 2.0 * delta;
            w_old * f * f
        }
    }
}

/// `∂L/∂θ = 2θ·∂L/∂w` for `w = θ²`, `θ = √w`.
pub fn beta_square_gradient(w: f64, grad_w: f64) -> f64 {
    2.0 * w.sqrt() * grad_w
}

/// Applies a policy coordinate-wise and remembers frozen coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NonNegProjector {
    policy: NonNegPolicy,
    frozen: Vec<bool>,
}

impl NonNegProjector {
    pub fn new(policy: NonNegPolicy, len: usize) -> Self {
        NonNegProjector { policy, frozen: vec![false; len] }
    }

    pub fn policy(&self) -> NonNegPolicy {
        self.policy
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    /// Applies the step and commits newly frozen coordinates.
    pub fn step(&mut self, w: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        let (next, frozen) = self.propose(w, delta);
        self.frozen = frozen;
        next
    }

    /// Applies the step without committing; returns the new weights and
    /// the frozen flags to pass to [`NonNegProjector::commit`] if the step
    /// is accepted.
    pub fn propose(&self, w: &DVector<f64>, delta: &DVector<f64>) -> (DVector<f64>, Vec<bool>) {
        let mut frozen = self.frozen.clone();
        let next = DVector::from_fn(w.len(), |m, _| apply_nonneg_policy(w[m], delta[m], self.policy, &mut frozen[m]));
        (next, frozen)
    }

    pub fn commit(&mut self, frozen: Vec<bool>) {
        self.frozen = frozen;
    }
}
