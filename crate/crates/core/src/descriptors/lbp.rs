//! Local binary patterns with bilinear circular sampling, and the two
//! histogram descriptors built on them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imaging::{lerp, GrayImage};

use super::{check_min_side, DescriptorId, FeatureVector, MIN_DESCRIPTOR_SIDE};

pub const LBP_RADIUS: f64 = 3.0;
pub const LBP_NEIGHBORS: usize = 15;
pub const HLBP_BINS: usize = 256;

/// How neighbors that fall outside the frame are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpBoundary {
    /// Every pixel gets a code; coordinates wrap around the frame.
    Periodic,
    /// Only pixels whose whole circle lies inside the frame get a code.
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbpCodes {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u32>,
}

/// Neighbor offsets `(dx, dy)` in image coordinates: angle `2*pi*p/P`
/// counter-clockwise as displayed, starting on the positive x-axis.
pub(crate) fn circle_offsets(radius: f64, neighbors: usize) -> Vec<(f64, f64)> {
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    (0..neighbors)
        .map(|p| {
            let a = 2.0 * PI * p as f64 / neighbors as f64;
            (snap(radius * a.cos()), snap(-radius * a.sin()))
        })
        .collect()
}

/// LBP code image. Bit `p` is set when neighbor `p` is at least the center.
pub fn lbp_codes(
    img: &GrayImage,
    radius: f64,
    neighbors: usize,
    boundary: LbpBoundary,
) -> Result<LbpCodes> {
    if !(radius > 0.0) || neighbors == 0 || neighbors > 31 {
        return Err(Error::InvalidArgument(format!(
            "LBP needs radius > 0 and 1..=31 neighbors, got {radius}, {neighbors}"
        )));
    }
    let reach = radius.ceil() as usize;
    let (w, h) = (img.width(), img.height());
    if w <= 2 * reach || h <= 2 * reach {
        return Err(Error::TooSmall(format!(
            "LBP radius {radius} needs more than {}x{} pixels, got {w}x{h}",
            2 * reach,
            2 * reach
        )));
    }
    let offsets = circle_offsets(radius, neighbors);
    let (xs, ys, ow, oh) = match boundary {
        LbpBoundary::Periodic => (0..w, 0..h, w, h),
        LbpBoundary::Interior => (reach..w - reach, reach..h - reach, w - 2 * reach, h - 2 * reach),
    };
    let pixel = |x: i64, y: i64| -> f64 {
        let x = x.rem_euclid(w as i64) as usize;
        let y = y.rem_euclid(h as i64) as usize;
        img.get(x, y) as f64
    };
    let mut codes = Vec::with_capacity(ow * oh);
    for y in ys {
        for x in xs.clone() {
            let center = img.get(x, y) as f64;
            let mut code = 0u32;
            for (p, &(dx, dy)) in offsets.iter().enumerate() {
                let sx = x as f64 + dx;
                let sy = y as f64 + dy;
                let (x0, y0) = (sx.floor(), sy.floor());
                let (fx, fy) = (sx - x0, sy - y0);
                let (x0, y0) = (x0 as i64, y0 as i64);
                let top = lerp(pixel(x0, y0), pixel(x0 + 1, y0), fx);
                let bottom = lerp(pixel(x0, y0 + 1), pixel(x0 + 1, y0 + 1), fx);
                if lerp(top, bottom, fy) >= center {
                    code |= 1 << p;
                }
            }
            codes.push(code);
        }
    }
    Ok(LbpCodes {
        width: ow,
        height: oh,
        codes,
    })
}

/// Number of circular 0-1 / 1-0 transitions in a `bits`-bit pattern.
pub fn transitions(code: u32, bits: usize) -> u32 {
    let mask = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
    let code = code & mask;
    let rotated = ((code >> 1) | ((code & 1) << (bits - 1))) & mask;
    (code ^ rotated).count_ones()
}

pub fn is_uniform(code: u32, bits: usize) -> bool {
    transitions(code, bits) <= 2
}

/// All uniform `bits`-bit patterns in ascending order.
pub fn uniform_patterns(bits: usize) -> Vec<u32> {
    (0..1u32 << bits).filter(|&c| is_uniform(c, bits)).collect()
}

fn default_codes(img: &GrayImage, what: &str) -> Result<LbpCodes> {
    check_min_side(img, MIN_DESCRIPTOR_SIDE, what)?;
    lbp_codes(img, LBP_RADIUS, LBP_NEIGHBORS, LbpBoundary::Periodic)
}

fn normalized(counts: Vec<u64>) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Histogram of 15-bit codes folded into 256 equal-width bins.
pub fn hlbp(img: &GrayImage) -> Result<FeatureVector> {
    let lbp = default_codes(img, "HLBP")?;
    let shift = LBP_NEIGHBORS as u32 - HLBP_BINS.trailing_zeros();
    let mut counts = vec![0u64; HLBP_BINS];
    for &c in &lbp.codes {
        counts[(c >> shift) as usize] += 1;
    }
    Ok(FeatureVector::new(DescriptorId::Hlbp, normalized(counts)))
}

/// Uniform-pattern histogram: one bin per uniform code, one shared bin for the rest.
pub fn ulbp(img: &GrayImage) -> Result<FeatureVector> {
    let lbp = default_codes(img, "ULBP")?;
    let uniform = uniform_patterns(LBP_NEIGHBORS);
    let mut slot = vec![uniform.len() as u32; 1 << LBP_NEIGHBORS];
    for (i, &c) in uniform.iter().enumerate() {
        slot[c as usize] = i as u32;
    }
    let mut counts = vec![0u64; uniform.len() + 1];
    for &c in &lbp.codes {
        counts[slot[c as usize] as usize] += 1;
    }
    Ok(FeatureVector::new(DescriptorId::Ulbp, normalized(counts)))
}
