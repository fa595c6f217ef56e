//! Perception-aligned clustering of 2D point sets.
//!
//! The crate bundles everything needed to train and evaluate a point-based
//! neural clusterer against groups of human (or simulated) raters:
//!
//! - [`data`]: dataset model, JSON Lines ingestion, normalization, splits,
//!   agreement filtering and a synthetic stimulus generator.
//! - [`metrics`]: co-membership similarity, per-point rater agreement, the
//!   agreement index, Vanbelle kappa, noise IoU and stratified reports.
//! - [`autodiff`]: a small reverse-mode tape with the primitives the network
//!   needs, plus Adam and a reduce-on-plateau schedule.
//! - [`model`]: farthest point sampling, ball query, the hierarchical point
//!   encoder with cluster/noise/agreement heads, and checkpoints.
//! - [`loss`]: weighted pairwise contrastive loss, noise loss, agreement loss.
//! - [`train`]: augmentation, sample construction, training and fine-tuning.
//! - [`baselines`]: DBSCAN, k-means, Ward and GMM plus a grid search harness.
//! - [`render`]: SVG scatterplots of clusterings.

pub mod autodiff;
pub mod baselines;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod render;
pub mod train;

pub use error::{Error, Result};

/// Label reserved for points outside every cluster.
pub const NOISE: u32 = 0;
