use serde::{Deserialize, Serialize};

use super::config::TrainerConfig;

/// Why a trainer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    /// Loss change over an epoch fell below the tolerance.
    Tol,
    /// `JᵀJ + μI` could not be factored or is numerically singular.
    SingularJacobian,
    /// LM damping exceeded its ceiling.
    DampingOverflow,
    /// The network could not be evaluated at the updated parameters
    /// (a neuron lost all outgoing mass, the solver diverged, a derivative
    /// system was singular).
    NumericalFailure,
}

/// Event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// BFGS/DFP Hessian approximations reset to the identity.
    pub cholesky_resets: usize,
    /// BFGS/DFP updates skipped because of a non-positive curvature pair.
    pub skipped_updates: usize,
    /// LM-AM epochs that fell back to the plain LM step.
    pub lm_am_fallbacks: usize,
    /// LM/LM-AM trial steps rejected.
    pub rejected_epochs: usize,
    /// Line searches that found no acceptable step.
    pub line_search_failures: usize,
}

/// Trained exogenous and output rates (extended gradient descent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedParams {
    pub lambda_plus: Vec<f64>,
    pub lambda_minus: Vec<f64>,
    pub rates: Vec<f64>,
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Batch MSE before the first epoch.
    pub initial_loss: f64,
    /// Batch MSE after each epoch; its length equals `iterations`.
    pub loss_trace: Vec<f64>,
    pub final_weights: Vec<f64>,
    pub extended: Option<ExtendedParams>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub stability_warnings: Vec<String>,
    pub counters: Counters,
    /// LM variants: damping used at each epoch.
    pub mu_trace: Vec<f64>,
    /// LM variants: whether each epoch's trial step was accepted.
    pub accepted: Vec<bool>,
    /// BFGS/DFP: whether `H̃` was symmetric positive definite at the start
    /// of each epoch, `None` on reset epochs.
    pub hessian_spd: Vec<Option<bool>>,
    pub config: TrainerConfig,
}

impl TrainReport {
    pub(crate) fn new(config: &TrainerConfig, initial_loss: f64) -> Self {
        TrainReport {
            initial_loss,
            loss_trace: Vec::new(),
            final_weights: Vec::new(),
            extended: None,
            iterations: 0,
            stop_reason: StopReason::MaxIters,
            stability_warnings: Vec::new(),
            counters: Counters::default(),
            mu_trace: Vec::new(),
            accepted: Vec::new(),
            hessian_spd: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(self.initial_loss)
    }

    /// First epoch (1-based) whose MSE is below `threshold`.
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.loss_trace.iter().position(|&l| l < threshold).map(|i| i + 1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `epoch,mse[,mu,accepted]` lines with a header.
    pub fn trace_csv(&self) -> String {
        let lm = !self.mu_trace.is_empty();
        let mut out = String::from(if lm { "epoch,mse,mu,accepted\n" } else { "epoch,mse\n" });
        for (t, l) in self.loss_trace.iter().enumerate() {
            if lm {
                out.push_str(&format!("{},{},{},{}\n", t + 1, l, self.mu_trace[t], self.accepted[t]));
            } else {
                out.push_str(&format!("{},{}\n", t + 1, l));
            }
        }
        out
    }
}
