//! Trainers and their shared machinery.
//!
//! All trainers minimize the squared error of the output neurons and
//! report the batch MSE after every epoch. Online gradient descent updates
//! after every sample; BFGS, DFP, LM and LM-AM work on the whole batch.

mod batch;
mod config;
mod gd;
mod line_search;
mod lm;
mod nonneg;
mod quasi_newton;
mod report;

use nalgebra::DVector;

pub use batch::{batch_forward, batch_mse, init_weights, solve_all, weight_sampler};
pub use config::{Algorithm, LineSearch, NonNegPolicy, TrainerConfig, DELTA_P_RANGE, MU_MAX, ZETA_RANGE};
pub use gd::{extended_gradient, online_gradient, train_gd, train_gd_extended, RATE_FLOOR};
pub use line_search::{line_search, ARMIJO_C, MAX_HALVINGS};
pub use lm::{damped_normal_matrix, lm_am_coefficients, lm_step, train_lm, train_lm_am, LmAmCoefficients};
pub use nonneg::{apply_nonneg_policy, beta_square_gradient, NonNegProjector, MAX_SHRINK};
pub use quasi_newton::{
    bfgs_c_squared, bfgs_factor, dfp_c_squared, dfp_factor, quasi_newton_minimize, train_bfgs, train_dfp, Objective,
    Projection, QuasiNewtonKind, QuasiNewtonRun, QuasiNewtonState, StepRule, UpdateOutcome,
};
pub use report::{Counters, ExtendedParams, StopReason, TrainReport};

use crate::data::Dataset;
use crate::error::Result;
use crate::network::NetworkSpec;

/// What a trainer exposes to an observer at the end of every epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochInfo<'a> {
    pub epoch: usize,
    /// Current weights (after the epoch's accept/reject decision).
    pub weights: &'a DVector<f64>,
    pub mse: f64,
    /// LM variants: damping used in this epoch.
    pub mu: Option<f64>,
    /// LM variants: whether the trial step was kept.
    pub accepted: Option<bool>,
}

/// Runs the algorithm selected in `config`; the spec ends with the final
/// weights.
pub fn train(spec: &mut NetworkSpec, data: &Dataset, config: &TrainerConfig) -> Result<TrainReport> {
    train_observed(spec, data, config, &mut |_| {})
}

/// [`train`] with a per-epoch callback.
pub fn train_observed(
    spec: &mut NetworkSpec,
    data: &Dataset,
    config: &TrainerConfig,
    observer: &mut dyn FnMut(&EpochInfo),
) -> Result<TrainReport> {
    match config.algorithm {
        Algorithm::Gd => gd::run(spec, data, config, false, observer),
        Algorithm::GdExt => gd::run(spec, data, config, true, observer),
        Algorithm::Bfgs => quasi_newton::run(spec, data, config, QuasiNewtonKind::Bfgs, observer),
        Algorithm::Dfp => quasi_newton::run(spec, data, config, QuasiNewtonKind::Dfp, observer),
        Algorithm::Lm => lm::run(spec, data, config, false, observer),
        Algorithm::LmAm => lm::run(spec, data, config, true, observer),
    }
}
