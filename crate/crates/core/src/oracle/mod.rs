//! Independent ground truth for the analytic code paths.
//!
//! Nothing here reuses the derivative machinery: queueing quantities come
//! from closed forms, linear flow equations or a truncated Markov chain,
//! and gradients from perturbing the network and re-solving it.

mod ctmc;
mod fd;
mod queue;

pub use ctmc::{gnetwork_ctmc_steady, CtmcSolution, CtmcSpec, DEFAULT_CAP, MAX_QUEUES, MAX_STATES, TRUNCATION_MASS};
pub use fd::{finite_diff_gradient, FdTarget};
pub use queue::{jackson_throughput, mm1_steady_state};

use serde::Serialize;

use crate::error::{Error, Result};

/// Pretty JSON of any oracle result, for test fixtures.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))
}
