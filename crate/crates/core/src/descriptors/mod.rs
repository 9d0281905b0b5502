//! Fixed-length texture descriptors.
//!
//! Every descriptor maps an image of any size (at least the documented
//! minimum) to a vector whose length depends only on the descriptor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{histogram, GrayImage};

mod entropy;
mod frf;
mod lbp;
mod wavelet;

pub use entropy::{le, shannon_bits, LE_BINS, LE_GRID};
pub use frf::{frf, frf_ring_stats, frf_with, FrfOptions, RingStats, FRF_RINGS};
pub use lbp::{
    hlbp, is_uniform, lbp_codes, transitions, ulbp, uniform_patterns, LbpBoundary, LbpCodes,
    HLBP_BINS, LBP_NEIGHBORS, LBP_RADIUS,
};
pub use wavelet::{
    dwt2, idwt2, we, wmv, wv, Level, Subbands, DB4_DEC_HI, DB4_DEC_LO, DWT_LEVELS,
    MIN_WAVELET_SIDE,
};

/// Smallest side accepted by every descriptor.
pub const MIN_DESCRIPTOR_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DescriptorId {
    Frf,
    Hlbp,
    Ulbp,
    Imhist,
    Wmv,
    Wv,
    We,
    Le,
}

impl DescriptorId {
    pub const ALL: [DescriptorId; 8] = [
        DescriptorId::Frf,
        DescriptorId::Hlbp,
        DescriptorId::Ulbp,
        DescriptorId::Imhist,
        DescriptorId::Wmv,
        DescriptorId::Wv,
        DescriptorId::We,
        DescriptorId::Le,
    ];

    pub fn dim(self) -> usize {
        match self {
            DescriptorId::Frf => 2 * FRF_RINGS,
            DescriptorId::Hlbp => HLBP_BINS,
            DescriptorId::Ulbp => LBP_NEIGHBORS * (LBP_NEIGHBORS - 1) + 3,
            DescriptorId::Imhist => 256,
            DescriptorId::Wmv => 2 * 3 * DWT_LEVELS,
            DescriptorId::Wv | DescriptorId::We => 3 * DWT_LEVELS,
            DescriptorId::Le => LE_BINS,
        }
    }

    /// Histogram-type descriptors whose components sum to one.
    pub fn is_histogram(self) -> bool {
        matches!(
            self,
            DescriptorId::Hlbp | DescriptorId::Ulbp | DescriptorId::Imhist | DescriptorId::Le
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorId::Frf => "FRF",
            DescriptorId::Hlbp => "HLBP",
            DescriptorId::Ulbp => "ULBP",
            DescriptorId::Imhist => "IMHIST",
            DescriptorId::Wmv => "WMV",
            DescriptorId::Wv => "WV",
            DescriptorId::We => "WE",
            DescriptorId::Le => "LE",
        }
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DescriptorId::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownDescriptor(s.to_string()))
    }
}

/// Parses a comma-separated descriptor list such as `"WMV,FRF"`.
pub fn parse_descriptor_list(list: &str) -> Result<Vec<DescriptorId>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub descriptor: DescriptorId,
    pub values: Vec<f64>,
    /// Processing chain of the source image.
    pub provenance: Vec<String>,
}

impl FeatureVector {
    pub(crate) fn new(descriptor: DescriptorId, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), descriptor.dim());
        FeatureVector {
            descriptor,
            values,
            provenance: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub(crate) fn check_min_side(img: &GrayImage, min: usize, what: &str) -> Result<()> {
    if img.width() < min || img.height() < min {
        return Err(Error::TooSmall(format!(
            "{what} needs at least {min}x{min}, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Normalized 256-bin intensity histogram.
pub fn imhist(img: &GrayImage) -> Result<FeatureVector> {
    let h = histogram(img, 256, true)?;
    Ok(FeatureVector::new(DescriptorId::Imhist, h.mass))
}

/// Computes `descriptor` on `img`, recording the image's provenance.
pub fn extract(img: &GrayImage, descriptor: DescriptorId) -> Result<FeatureVector> {
    check_min_side(img, MIN_DESCRIPTOR_SIDE, descriptor.name())?;
    let mut fv = match descriptor {
        DescriptorId::Frf => frf(img)?,
        DescriptorId::Hlbp => hlbp(img)?,
        DescriptorId::Ulbp => ulbp(img)?,
        DescriptorId::Imhist => imhist(img)?,
        DescriptorId::Wmv => wmv(img)?,
        DescriptorId::Wv => wv(img)?,
        DescriptorId::We => we(img)?,
        DescriptorId::Le => le(img)?,
    };
    fv.provenance = img.provenance().to_vec();
    fv.provenance.push(format!("descriptor:{descriptor}"));
    Ok(fv)
}

/// Looks a descriptor up by name, then extracts it.
pub fn extract_named(img: &GrayImage, name: &str) -> Result<FeatureVector> {
    extract(img, name.parse()?)
}
