//! Contextual bandits with a low-rank, separable reward matrix.

pub mod algorithms;
pub mod environment;
pub mod error;
pub mod genmodel;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod nmf;

pub use error::{Error, Result};
pub use genmodel::{BanditInstance, RewardModel};
pub use linalg::DenseMatrix;
