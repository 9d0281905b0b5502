//! Finger region extraction.
//!
//! Two pipelines are provided. [`extract_roi_aligned`] segments a single
//! sample, estimates its centroid and principal axis, rotates the finger to
//! horizontal and crops a fixed window around the new centroid.
//! [`extract_roi_common`] finds one rectangle shared by every sample of a
//! dataset from stacked edge-derived finger masks and crops all of them there.

mod canny;
mod extract;
mod geometry;
mod mask;
mod morphology;
mod segment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use canny::{canny, CANNY_SIGMA};
pub use extract::{extract_roi_aligned, extract_roi_common, finger_region, AlignedRoi, CommonRoi, Rect};
pub use geometry::{axis_difference, fit_axis, mass_center, AxisFit, ISOTROPY_THRESHOLD};
pub use mask::BinaryMask;
pub use morphology::{close, dilate, erode, fill_contour, largest_component};
pub use segment::{
    centered_rectangle, chan_vese, chan_vese_with, morph_acwe, morph_acwe_from, ChanVeseParams,
    Segmentation, ACWE_INIT_COVERAGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoiMethod {
    ActiveContour,
    ChanVese,
    CommonPatch,
}

/// Tunables shared by both ROI pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiParams {
    /// Hysteresis thresholds as fractions of the maximum gradient magnitude.
    pub canny_low: f64,
    pub canny_high: f64,
    pub closing_radius: usize,
    pub dilation_radius: usize,
    pub acwe_iterations: usize,
    pub acwe_smoothing: usize,
    pub chan_vese: ChanVeseParams,
}

impl Default for RoiParams {
    fn default() -> Self {
        Self {
            canny_low: 0.1,
            canny_high: 0.2,
            closing_radius: 3,
            dilation_radius: 3,
            acwe_iterations: 200,
            acwe_smoothing: 2,
            chan_vese: ChanVeseParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub dataset_id: String,
    pub method: RoiMethod,
    pub out_w: usize,
    pub out_h: usize,
    #[serde(default)]
    pub params: RoiParams,
}

/// Published geometry of one public finger vein dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetGeometry {
    pub dataset_id: String,
    pub method: RoiMethod,
    /// Raw sample size as published (first × second figure).
    pub original_rows: usize,
    pub original_cols: usize,
    pub out_h: usize,
    pub out_w: usize,
}

const DATASET_TABLE: &str = include_str!("../../data/roi_specs.json");

/// ROI sizes and methods of the eight reference datasets.
pub fn dataset_table() -> Vec<DatasetGeometry> {
    serde_json::from_str(DATASET_TABLE).expect("bundled dataset table is valid")
}

impl RoiSpec {
    pub fn for_dataset(dataset_id: &str) -> Result<Self> {
        dataset_table()
            .into_iter()
            .find(|d| d.dataset_id.eq_ignore_ascii_case(dataset_id))
            .map(|d| RoiSpec {
                dataset_id: d.dataset_id,
                method: d.method,
                out_w: d.out_w,
                out_h: d.out_h,
                params: RoiParams::default(),
            })
            .ok_or_else(|| Error::Config(format!("no ROI geometry for dataset `{dataset_id}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_eight_datasets_with_published_sizes() {
        let t = dataset_table();
        assert_eq!(t.len(), 8);
        let sdumla = RoiSpec::for_dataset("sdumla").unwrap();
        assert_eq!((sdumla.out_h, sdumla.out_w), (85, 320));
        assert_eq!(sdumla.method, RoiMethod::CommonPatch);
        let palmar = RoiSpec::for_dataset("Palmar").unwrap();
        assert_eq!(palmar.method, RoiMethod::ChanVese);
        assert!(RoiSpec::for_dataset("nope").is_err());
    }
}
