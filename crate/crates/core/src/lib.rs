//! Random neural networks (G-networks) for supervised learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`], [`neuron`] and [`solve`]: the data model and the
//!   steady-state activity rates,
//! * [`deriv`]: exact first derivatives of the rates and of the loss,
//! * [`optim`]: gradient descent, BFGS, DFP, Levenberg–Marquardt and LM
//!   with adaptive momentum,
//! * [`esqn`]: echo state queueing networks,
//! * [`oracle`]: independent ground truth from queueing theory and finite
//!   differences,
//! * [`data`]: datasets, tasks and metrics.
//!
//! ```
//! use gnet_core::network::NetworkSpec;
//! use gnet_core::solve::solve;
//!
//! let spec = NetworkSpec::layered(&[2, 2, 1], 1.0, || 0.5).unwrap();
//! let state = solve(&spec, &[0.3, 0.8]).unwrap();
//! assert!(state.rho.iter().all(|&r| (0.0..=1.0).contains(&r)));
//! ```

pub mod ann;
pub mod data;
pub mod deriv;
pub mod error;
pub mod esqn;
pub mod model;
pub mod network;
pub mod neuron;
pub mod optim;
pub mod oracle;
pub mod solve;

pub use error::{Error, Result};
