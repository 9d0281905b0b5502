//! Three-level separable Daubechies-4 (8-tap) wavelet decomposition and the
//! subband statistics built on it.


use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Plane};

use super::{DescriptorId, FeatureVector};

pub const DWT_LEVELS: usize = 3;

/// Smallest side accepted by the wavelet descriptors.
pub const MIN_WAVELET_SIDE: usize = 32;

/// Decomposition low-pass filter (time-reversed scaling filter).
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

/// Decomposition high-pass filter (quadrature mirror of the scaling filter).
pub const DB4_DEC_HI: [f64; 8] = [
    -0.2303778133088965,
    0.7148465705529157,
    -0.6308807679298589,
    -0.027983769416859854,
    0.18703481171909309,
    0.030841381835560764,
    -0.0328830116668852,
    -0.010597401785069032,
];

const TAPS: usize = DB4_DEC_LO.len();

/// Detail subbands of one level: `h` is high-pass across rows (horizontal
/// edges), `v` high-pass across columns, `d` high-pass in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub width: usize,
    pub height: usize,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
}

impl Level {
    pub fn bands(&self) -> [&[f64]; 3] {
        [&self.h, &self.v, &self.d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    /// Finest level first.
    pub levels: Vec<Level>,
    /// Sizes of the approximation each level was computed from.
    pub input_sizes: Vec<(usize, usize)>,
    pub approximation: Plane,
}

/// Half-sample symmetric index: `x[-1] = x[0]`, `x[n] = x[n-1]`.
#[inline]
fn symmetric_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let i = i.rem_euclid(period);
    (if i < n { i } else { period - 1 - i }) as usize
}

#[inline]
pub(crate) fn coeff_len(n: usize) -> usize {
    (n + TAPS - 1) / 2
}

/// One analysis step on a 1-D signal: `(approx, detail)`.
pub(crate) fn analyze(signal: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let m = coeff_len(n);
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    for k in 0..m {
        let i = (2 * k + 1) as i64;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..TAPS {
            let x = signal[symmetric_index(i - j as i64, n)];
            a += DB4_DEC_LO[j] * x;
            d += DB4_DEC_HI[j] * x;
        }
        lo.push(a);
        hi.push(d);
    }
    (lo, hi)
}

/// Inverse of [`analyze`] for a signal of length `n`.
pub(crate) fn synthesize(lo: &[f64], hi: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let mut s = 0.0;
            for (k, (a, d)) in lo.iter().zip(hi).enumerate() {
                let j = 2 * k as i64 + 1 - t as i64;
                if (0..TAPS as i64).contains(&j) {
                    s += DB4_DEC_LO[j as usize] * a + DB4_DEC_HI[j as usize] * d;
                }
            }
            s
        })
        .collect()
}

fn transform_rows(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let m = coeff_len(w);
    let mut lo = vec![0.0; m * h];
    let mut hi = vec![0.0; m * h];
    for y in 0..h {
        let (a, d) = analyze(&data[y * w..(y + 1) * w]);
        lo[y * m..(y + 1) * m].copy_from_slice(&a);
        hi[y * m..(y + 1) * m].copy_from_slice(&d);
    }
    (lo, hi, m)
}

fn transform_cols(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let m = coeff_len(h);
    let mut lo = vec![0.0; w * m];
    let mut hi = vec![0.0; w * m];
    let mut column = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        let (a, d) = analyze(&column);
        for k in 0..m {
            lo[k * w + x] = a[k];
            hi[k * w + x] = d[k];
        }
    }
    (lo, hi, m)
}

/// Three-level 2-D decomposition of a plane.
pub fn dwt2_plane(plane: &Plane) -> Result<Subbands> {
    let (mut w, mut h) = (plane.width, plane.height);
    if w < MIN_WAVELET_SIDE || h < MIN_WAVELET_SIDE {
        return Err(Error::TooSmall(format!(
            "wavelet decomposition needs at least {MIN_WAVELET_SIDE}x{MIN_WAVELET_SIDE}, got {w}x{h}"
        )));
    }
    let mut approx = plane.data.clone();
    let mut levels = Vec::with_capacity(DWT_LEVELS);
    let mut input_sizes = Vec::with_capacity(DWT_LEVELS);
    for _ in 0..DWT_LEVELS {
        input_sizes.push((w, h));
        let (row_lo, row_hi, cw) = transform_rows(&approx, w, h);
        let (ll, lh, ch) = transform_cols(&row_lo, cw, h);
        let (hl, hh, _) = transform_cols(&row_hi, cw, h);
        levels.push(Level {
            width: cw,
            height: ch,
            h: lh,
            v: hl,
            d: hh,
        });
        approx = ll;
        w = cw;
        h = ch;
    }
    Ok(Subbands {
        levels,
        input_sizes,
        approximation: Plane {
            width: w,
            height: h,
            data: approx,
        },
    })
}

/// Three-level decomposition of the unit-scaled image.
pub fn dwt2(img: &GrayImage) -> Result<Subbands> {
    dwt2_plane(&img.to_unit_plane())
}

/// Reconstructs the plane the subbands were computed from.
pub fn idwt2(bands: &Subbands) -> Plane {
    let mut approx = bands.approximation.data.clone();
    for (level, &(w, h)) in bands.levels.iter().zip(&bands.input_sizes).rev() {
        let (cw, ch) = (level.width, level.height);
        let columns = |lo: &[f64], hi: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; cw * h];
            let (mut a, mut d) = (vec![0.0; ch], vec![0.0; ch]);
            for x in 0..cw {
                for k in 0..ch {
                    a[k] = lo[k * cw + x];
                    d[k] = hi[k * cw + x];
                }
                for (y, v) in synthesize(&a, &d, h).into_iter().enumerate() {
                    out[y * cw + x] = v;
                }
            }
            out
        };
        let row_lo = columns(&approx, &level.h);
        let row_hi = columns(&level.v, &level.d);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let line = synthesize(&row_lo[y * cw..(y + 1) * cw], &row_hi[y * cw..(y + 1) * cw], w);
            out[y * w..(y + 1) * w].copy_from_slice(&line);
        }
        approx = out;
    }
    let (w, h) = bands.input_sizes[0];
    Plane {
        width: w,
        height: h,
        data: approx,
    }
}

fn mean(c: &[f64]) -> f64 {
    c.iter().sum::<f64>() / c.len() as f64
}

fn variance(c: &[f64]) -> f64 {
    let m = mean(c);
    c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len() as f64
}

/// Mean squared coefficient below which a band counts as all-zero; filter
/// round-off on a flat image stays many orders of magnitude under it.
pub const ZERO_BAND_ENERGY: f64 = 1e-20;

/// Shannon entropy in bits of `c_i^2 / sum(c^2)`; zero for an all-zero band.
pub(crate) fn energy_entropy(c: &[f64]) -> f64 {
    let total: f64 = c.iter().map(|v| v * v).sum();
    if total <= ZERO_BAND_ENERGY * c.len() as f64 {
        return 0.0;
    }
    -c.iter()
        .map(|v| v * v / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

fn per_band(img: &GrayImage, stat: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
    let bands = dwt2(img)?;
    Ok(bands
        .levels
        .iter()
        .flat_map(|l| l.bands().into_iter().flat_map(&stat).collect::<Vec<_>>())
        .collect())
}

/// Mean absolute coefficient and standard deviation per detail subband.
pub fn wmv(img: &GrayImage) -> Result<FeatureVector> {
    let values = per_band(img, |c| {
        let abs_mean = c.iter().map(|v| v.abs()).sum::<f64>() / c.len() as f64;
        vec![abs_mean, variance(c).sqrt()]
    })?;
    Ok(FeatureVector::new(DescriptorId::Wmv, values))
}

/// Coefficient variance per detail subband.
pub fn wv(img: &GrayImage) -> Result<FeatureVector> {
    let values = per_band(img, |c| vec![variance(c)])?;
    Ok(FeatureVector::new(DescriptorId::Wv, values))
}

/// Energy entropy per detail subband.
pub fn we(img: &GrayImage) -> Result<FeatureVector> {
    let values = per_band(img, |c| vec![energy_entropy(c)])?;
    Ok(FeatureVector::new(DescriptorId::We, values))
}
