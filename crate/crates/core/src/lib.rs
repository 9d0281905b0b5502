//! Finger vein sensor model identification.
//!
//! Texture descriptors computed on raw or region-of-interest samples are
//! classified with one-vs-rest support vector machines and scored with
//! micro-averaged ROC and precision-recall areas.
//!
//! Modules, bottom-up:
//!
//! - [`imaging`]: 8-bit rasters, decoding, rotation, cropping, statistics.
//! - [`enhance`]: adaptive Wiener filter and CLAHE.
//! - [`roi`]: segmentation, edge maps, morphology and the two ROI pipelines.
//! - [`descriptors`]: the eight fixed-length texture descriptors.
//! - [`svm`]: kernels, SMO training, one-vs-rest models, grid search.
//! - [`metrics`]: confusion counts, micro averages, ROC/PR curves and AUC.
//! - [`experiment`]: ingestion, splits, synthetic sensors and the full matrix run.

pub mod descriptors;
pub mod enhance;
pub mod error;
pub mod experiment;
pub mod imaging;
pub mod metrics;
pub mod roi;
pub mod svm;

pub use error::{Error, Result};
pub use imaging::GrayImage;
