//! Heteroscedastic classification under label noise: a Gaussian over the
//! logits, tempered Monte Carlo links, synthetic noisy-label generators
//! with a noise oracle, uncertainty-reliability evaluation and a
//! temperature sweep.

pub mod cli;
pub mod error;
pub mod eval;
pub mod label;
pub mod noisegen;
pub mod prob_head;
pub mod rng;
pub mod special;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
