//! Guide chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/gradients.md")]
pub mod gradients {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/esqn.md")]
pub mod esqn {}

#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
