//! Clustering algorithm recommendation toolkit.
//!
//! The crate is organised around the stages of the recommendation workflow:
//!
//! * [`synthgen`] generates labelled synthetic datasets (isotropic Gaussian
//!   blobs with a separation scalar, and overlap-controlled ellipsoids), plus
//!   z-score normalisation and centred zero padding.
//! * [`clusterlib`] holds ten clustering algorithms written from scratch and
//!   the per-configuration hyperparameter grid search.
//! * [`validity`] provides ARI, the four internal validity indices,
//!   multi-label F1/Hamming and the Wilcoxon signed-rank test.
//! * [`neuralnet`] is a small reverse-mode autodiff engine together with the
//!   convolution / residual / self-attention recommender network.
//! * [`pipeline`] ties everything together: repository build, label
//!   derivation, cross-validation, CVI baselines, ablations and the
//!   real-data protocol.
//! * [`cli`] exposes the pipeline as the `clustsel` command.

pub mod cli;
pub mod clusterlib;
pub mod error;
pub mod matrix;
pub mod neuralnet;
pub mod pipeline;
pub mod rng;
pub mod synthgen;
pub mod validity;

pub use error::{Error, Result};
pub use matrix::Matrix;
