use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solve::StabilityScope;

/// Recommended range for the LM-AM conjugacy factor `ζ`.
pub const ZETA_RANGE: (f64, f64) = (0.85, 0.95);
/// Recommended range for the LM-AM step-size bound `ΔP`.
pub const DELTA_P_RANGE: (f64, f64) = (0.1, 0.6);

/// Damping above which LM gives up.
pub const MU_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Online gradient descent on the weights.
    Gd,
    /// Online gradient descent on weights, exogenous rates and output rates.
    GdExt,
    Bfgs,
    Dfp,
    /// Levenberg–Marquardt.
    Lm,
    /// Levenberg–Marquardt with adaptive momentum.
    LmAm,
}

/// How updates are kept from driving weights below zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonNegPolicy {
    /// Clamp at zero and never move the weight again.
    FreezeZero,
    /// Clamp at zero; later positive updates are allowed.
    #[default]
    ClipZero,
    /// Halve the step (up to 20 times) until the weight stays positive,
    /// clip otherwise.
    ShrinkEta,
    /// Train `θ` with `w = θ²`.
    BetaSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearch {
    /// Full step, `α = 1`.
    None,
    /// Halving from `α = 1` until sufficient decrease.
    #[default]
    Backtracking,
}

/// Every tunable of the six trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    /// Learning factor of the weights, in `[0, 1]`.
    pub eta: f64,
    /// Learning factor of `λ⁺`, `λ⁻` (extended gradient descent).
    pub eta1: f64,
    /// Learning factor of the output rates (extended gradient descent).
    pub eta2: f64,
    pub mu0: f64,
    pub beta: f64,
    pub zeta: f64,
    pub delta_p: f64,
    /// Epochs (full passes over the data).
    pub max_iters: usize,
    /// Stop once the MSE changes by less than this over an epoch.
    pub tolerance: f64,
    pub nonneg_policy: NonNegPolicy,
    /// Used by BFGS and DFP; LM variants always take the full step.
    pub line_search: LineSearch,
    pub rng_seed: u64,
    pub init_range: [f64; 2],
    /// Service rate given to output neurons at construction.
    pub output_rate: f64,
    pub stability_scope: StabilityScope,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            algorithm: Algorithm::Gd,
            eta: 0.1,
            eta1: 0.01,
            eta2: 0.01,
            mu0: 1e-3,
            beta: 10.0,
            zeta: 0.9,
            delta_p: 0.5,
            max_iters: 1000,
            tolerance: 1e-8,
            nonneg_policy: NonNegPolicy::ClipZero,
            line_search: LineSearch::Backtracking,
            rng_seed: 0,
            init_range: [0.1, 1.0],
            output_rate: 1.0,
            stability_scope: StabilityScope::All,
        }
    }
}

impl TrainerConfig {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        TrainerConfig { algorithm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidParameter(format!("{field}: {why}")));
        // eta = 0 is accepted: it is the documented null-step case
        if !(0.0..=1.0).contains(&self.eta) {
            return bad("eta", format!("must lie in [0, 1], got {}", self.eta));
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(name, format!("must be finite and >= 0, got {v}"));
            }
        }
        if !(self.mu0 > 0.0) || !self.mu0.is_finite() {
            return bad("mu0", format!("must be > 0, got {}", self.mu0));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return bad("beta", format!("must be > 1, got {}", self.beta));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad("zeta", format!("must lie in (0, 1), got {}", self.zeta));
        }
        if !(self.delta_p > 0.0) || !self.delta_p.is_finite() {
            return bad("delta_p", format!("must be > 0, got {}", self.delta_p));
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance", format!("must be >= 0, got {}", self.tolerance));
        }
        let [lo, hi] = self.init_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad("init_range", format!("need 0 <= lo <= hi, got [{lo}, {hi}]"));
        }
        if !(self.output_rate > 0.0) || !self.output_rate.is_finite() {
            return bad("output_rate", format!("must be > 0, got {}", self.output_rate));
        }
        Ok(())
    }
}
