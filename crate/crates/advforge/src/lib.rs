//! Natural adversarial example generation for small text classifiers.
//!
//! The pipeline has two stages. A probing stage scores every input token's
//! contribution to a classifier decision, either black-box ([`attribution::lime_attribute`])
//! or white-box ([`attribution::ig_attribute`]). A generative stage trains a small
//! autoregressive decoder on control-token prompts built from the influential tokens
//! and decodes label-flipped candidates ([`advgen`]). Substitution baselines
//! ([`baselines`]) and an evaluation harness ([`eval`]) round out the toolkit.
//!
//! Everything is deterministic given a seed: training, sampling, attribution, and
//! report files are reproducible byte-for-byte.

pub mod advgen;
pub mod attribution;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod nnet;
pub mod util;

pub use error::{Error, Result};
