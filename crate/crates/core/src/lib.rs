//! Sulfate-attack expansion modelling for concrete mixtures.
//!
//! Mixtures are sorted into three expansion-pattern groups (HN, ML, LL),
//! each with its own regression model for expansion over time. The crate
//! ships the published default models and boundaries, and can re-fit the
//! whole chain (smoothing, K-means, PCA, OLS, linear SVM) from measured
//! expansion histories.

pub mod clustering;
pub mod curveproc;
pub mod domain;
pub mod error;
pub mod io;
pub mod numkernel;
pub mod pca;
pub mod regression;
pub mod svm;

pub use domain::{GroupLabel, GroupModel, Mixture, ModelBundle};
pub use error::{Error, Result, Stage};
