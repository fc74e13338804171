//! Desk-scale deep Q-learning experimentation stack.
//!
//! The crate reproduces, on small grid games, a protocol for measuring how
//! value-based agents generalize across environment flavours (same game, a
//! few latent variables changed) and how dropout + L2 regularization affect
//! zero-shot evaluation and fine-tuning:
//!
//! - [`nn`]: from-scratch conv/dense Q-network, inverted dropout, L2 penalty,
//!   RMSProp-style optimizer, and a finite-difference gradient verifier.
//! - [`env`]: flavoured mini-environments with a protocol wrapper (sticky
//!   actions + frame skip), tabular export, and an optimal-return oracle.
//! - [`agent`]: the DQN training loop with replay, target network, and the
//!   frames/steps/updates cadence.
//! - [`transfer`]: checkpoint persistence and transfer-initialization schemes
//!   for fine-tuning runs.
//! - [`protocol`]: cross-flavour evaluation, curves, aggregation, smoothing,
//!   sweep generation, and frame accounting.
//! - [`harness`]: config resolution, run directories, reports, and the CLI
//!   entry points.

pub mod error;
pub mod rng;
pub mod tensor;

pub mod agent;
pub mod env;
pub mod harness;
pub mod nn;
pub mod protocol;
pub mod transfer;

pub use error::{CheckpointError, ConfigError, EnvError, HarnessError, NnError, TrainError};
pub use rng::{Rng, Stream};
pub use tensor::{Scalar, Tensor};
