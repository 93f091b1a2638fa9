//! Supervised contrastive fine-tuning with hard-negative weighting.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: stable primitives (log-sum-exp, softmax, Jacobi eigen, PCA)
//! * [`data`]: synthetic/CSV/IDX datasets, stratified splits and N-way K-shot episodes
//! * [`objectives`]: cross-entropy, SimCLR, SupCon and the hard-negative weighted
//!   supervised contrastive loss, each with analytic gradients
//! * [`framework`]: augmentation, MLP encoder with L2-normalized outputs,
//!   classification head, backprop, Adam and the training loop
//! * [`metrics`]: accuracy, confidence intervals, isotropy, cosine statistics and
//!   episodic few-shot evaluation

pub mod data;
pub mod error;
pub mod framework;
pub mod metrics;
pub mod numerics;
pub mod objectives;
pub mod seed;

pub use error::{Error, Result};
pub use numerics::Matrix;
