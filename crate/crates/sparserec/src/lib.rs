//! Occlusion-robust image classification by sparse representation over a
//! hierarchically compressed dictionary.
//!
//! The pipeline stacks three stages:
//!
//! 1. [`gabor`] — a multi-scale, multi-orientation wavelet bank turns each
//!    image into an augmented magnitude feature vector that ignores global
//!    intensity offsets.
//! 2. [`elm_ae`] — a randomized autoencoder (orthogonal random hidden
//!    weights, one ridge solve) whose output weights act as a fast linear
//!    compression map to a low-dimensional feature space.
//! 3. [`classifier`] — test features are sparse-coded over a dictionary of
//!    training atoms (plus optional occlusion atoms) and classified by
//!    minimum per-class reconstruction residual; an image can also be
//!    split into blocks classified independently with majority voting.
//!
//! Sparse coding lives in [`sparse`]: a certified coordinate-descent
//! weighted-L1 solver, an L1/2 solver built on reweighting, and an
//! alternating-minimization learner that compresses an occlusion basis
//! into a few unit-norm atoms.
//!
//! [`dataset`] provides loaders, seeded synthetic data and synthetic
//! occlusions; [`bench`] is the config-driven experiment harness behind
//! the `sparserec` binary. See the crate examples for one runnable
//! walkthrough per capability.

pub mod bench;
pub mod classifier;
pub mod dataset;
pub mod elm_ae;
pub mod error;
pub mod gabor;
pub mod linalg;
pub mod sparse;

pub use error::{Error, Result};
