//! Fourier ring filter: magnitude statistics over concentric frequency rings.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Plane};

use super::{check_min_side, DescriptorId, FeatureVector, MIN_DESCRIPTOR_SIDE};

pub const FRF_RINGS: usize = 15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrfOptions {
    /// Use `ln(1 + |F|)` instead of the raw magnitude.
    pub log_magnitude: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Unitary 2-D DFT (scaled by `1/sqrt(width*height)`).
pub(crate) fn fft2(plane: &Plane) -> Vec<Complex<f64>> {
    let (w, h) = (plane.width, plane.height);
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = plane.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let rows = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        rows.process(row);
    }
    let cols = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        cols.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    let scale = 1.0 / ((w * h) as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Signed normalized frequency of DFT bin `k` out of `n`, in `[-0.5, 0.5]`.
#[inline]
pub(crate) fn bin_frequency(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

/// Ring of the bin at normalized radius `r`; radii beyond the last band
/// (including the corners past 0.5) belong to the outermost ring.
#[inline]
pub(crate) fn ring_index(r: f64) -> usize {
    ((r * (2 * FRF_RINGS) as f64).floor() as usize).min(FRF_RINGS - 1)
}

/// Per-ring counts, means and standard deviations of the spectrum magnitude.
pub fn frf_ring_stats(img: &GrayImage, options: FrfOptions) -> Result<Vec<RingStats>> {
    check_min_side(img, MIN_DESCRIPTOR_SIDE, "FRF")?;
    let (w, h) = (img.width(), img.height());
    let spectrum = fft2(&img.to_unit_plane());
    let mut count = [0usize; FRF_RINGS];
    let mut sum = [0.0f64; FRF_RINGS];
    let mut sum_sq = [0.0f64; FRF_RINGS];
    for v in 0..h {
        let fy = bin_frequency(v, h);
        for u in 0..w {
            let fx = bin_frequency(u, w);
            let ring = ring_index(fx.hypot(fy));
            let mut m = spectrum[v * w + u].norm();
            if options.log_magnitude {
                m = m.ln_1p();
            }
            count[ring] += 1;
            sum[ring] += m;
            sum_sq[ring] += m * m;
        }
    }
    if let Some(k) = count.iter().position(|&c| c == 0) {
        return Err(Error::TooSmall(format!(
            "FRF ring {k} is empty for a {w}x{h} image"
        )));
    }
    Ok((0..FRF_RINGS)
        .map(|k| {
            let n = count[k] as f64;
            let mean = sum[k] / n;
            let var = (sum_sq[k] / n - mean * mean).max(0.0);
            RingStats {
                count: count[k],
                mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// FRF descriptor `(mean_0, std_0, ..., mean_14, std_14)` of the raw magnitude.
pub fn frf(img: &GrayImage) -> Result<FeatureVector> {
    frf_with(img, FrfOptions::default())
}

pub fn frf_with(img: &GrayImage, options: FrfOptions) -> Result<FeatureVector> {
    let values = frf_ring_stats(img, options)?
        .iter()
        .flat_map(|s| [s.mean, s.std])
        .collect();
    Ok(FeatureVector::new(DescriptorId::Frf, values))
}
