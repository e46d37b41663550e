//! Differentiable state-vector simulation and adversarial-robustness tooling
//! for small quantum variational classifiers.
//!
//! Convention used throughout: qubit `k` is the k-th least-significant bit of
//! the basis-state index, so `|q_{n−1} … q_1 q_0⟩` maps to the integer
//! `Σ_k q_k·2^k`. Gate angles are radians.

pub mod attack;
pub mod checkpoint;
pub mod classical;
pub mod classifier;
pub mod data;
pub mod encoding;
pub mod error;
pub mod grad;
pub mod noise;
pub mod optim;
pub mod qvc;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
