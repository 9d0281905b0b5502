use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::BinaryMask;

/// Anisotropy `sqrt((mu20 - mu02)^2 + 4 mu11^2) / (mu20 + mu02)` below which
/// the orientation is considered undefined.
pub const ISOTROPY_THRESHOLD: f64 = 1e-2;

/// Centroid of the foreground pixels.
pub fn mass_center(mask: &BinaryMask) -> Result<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Segmentation("mass center of an empty mask".into()));
    }
    Ok((sx / n as f64, sy / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    /// Principal-axis angle in degrees, counter-clockwise from the x-axis as
    /// displayed, in `(-90, 90]`.
    pub theta: f64,
    /// The second moments are (nearly) isotropic; `theta` is reported as 0.
    pub degenerate: bool,
}

/// Orientation of the principal axis from the second central moments.
pub fn fit_axis(mask: &BinaryMask) -> Result<AxisFit> {
    if mask.count() < 2 {
        return Err(Error::Segmentation(
            "axis fit needs at least two foreground pixels".into(),
        ));
    }
    let (cx, cy) = mass_center(mask)?;
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                mu20 += dx * dx;
                mu02 += dy * dy;
                mu11 += dx * dy;
            }
        }
    }
    let spread = mu20 + mu02;
    let anisotropy = ((mu20 - mu02).powi(2) + 4.0 * mu11 * mu11).sqrt() / spread;
    if spread <= 0.0 || anisotropy < ISOTROPY_THRESHOLD {
        return Ok(AxisFit {
            theta: 0.0,
            degenerate: true,
        });
    }
    // Image rows grow downwards, so the displayed angle is the negated one.
    let mut theta = -0.5 * (2.0 * mu11).atan2(mu20 - mu02).to_degrees();
    if theta <= -90.0 {
        theta += 180.0;
    }
    Ok(AxisFit {
        theta,
        degenerate: false,
    })
}

/// Smallest absolute difference between two axis angles, modulo 180 degrees.
pub fn axis_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}
