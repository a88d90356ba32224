//! Differentially-private graphical-model synthetic data generators (a
//! tree model selected by a private maximum spanning tree, and a greedy
//! Bayesian network), together with the membership-inference attacks that
//! target them and an experiment harness to measure attack success.
//!
//! Generators and attacks are registered by name in
//! [`sdg::GeneratorRegistry`] and [`attack::AttackRegistry`], and the
//! harness and CLI select them at runtime.

pub mod attack;
pub mod data;
pub mod dp;
pub mod error;
pub mod eval;
pub mod harness;
pub mod marginals;
pub mod recovery;
pub mod rng;
pub mod sdg;
pub mod structure;

pub use error::{Error, Result};
