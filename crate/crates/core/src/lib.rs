//! A desk-scale laboratory for CSI-based physical-layer authentication.
//!
//! The crate simulates time- and space-correlated multipath OFDM channels,
//! builds the noise-aware Neyman-Pearson detector from closed-form channel
//! statistics, trains the model-driven LiteNP-Net from labeled CSI pairs and
//! evaluates every detector through ROC/AUC sweeps.
//!
//! Module map:
//! - [`channel`]: tap-domain channel generation and noisy LS CSI measurement.
//! - [`stats`]: true and estimated channel statistics (covariances,
//!   conditional means under both hypotheses).
//! - [`detector`]: NP coefficient matrices, test statistics, baselines and a
//!   log-likelihood oracle.
//! - [`litenp`]: the LiteNP-Net embedding networks with manual gradients,
//!   RMSprop and contrastive-loss training.
//! - [`metrics`]: ROC construction, AUC and threshold selection.
//! - [`data`]: labeled pair datasets, CSV interchange and preprocessing.

pub mod channel;
pub mod data;
pub mod detector;
pub mod error;
pub mod linalg;
pub mod litenp;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
