//! Adaptive Wiener denoising followed by CLAHE, the "Enh." preprocessing condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{quantize, reflect_index, GrayImage};

/// Provenance tag recorded by [`enhance_pipeline`].
pub const ENHANCED_TAG: &str = "Enh.";

const WIENER_EPS: f64 = 1e-6;

/// Parameters of the two-stage enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceParams {
    pub wiener_window: usize,
    /// Clip limit relative to the mass of a uniform tile histogram.
    pub clahe_clip: f64,
    /// Tile grid is `clahe_tiles` × `clahe_tiles`.
    pub clahe_tiles: usize,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self {
            wiener_window: 5,
            clahe_clip: 2.0,
            clahe_tiles: 8,
        }
    }
}

/// Lee-form adaptive Wiener filter over a `window`×`window` neighbourhood.
///
/// The noise power is estimated as the mean of all local variances.
pub fn wiener_filter(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "wiener window must be odd and >= 3, got {window}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    if window > w.min(h) {
        return Err(Error::InvalidArgument(format!(
            "wiener window {window} exceeds image {w}x{h}"
        )));
    }
    let half = (window / 2) as i64;
    let area = (window * window) as f64;
    let mut means = vec![0.0; w * h];
    let mut vars = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut s, mut s2) = (0.0, 0.0);
            for dy in -half..=half {
                let yy = reflect_index(y as i64 + dy, h);
                for dx in -half..=half {
                    let v = img.get(reflect_index(x as i64 + dx, w), yy) as f64;
                    s += v;
                    s2 += v * v;
                }
            }
            let mean = s / area;
            means[y * w + x] = mean;
            vars[y * w + x] = (s2 / area - mean * mean).max(0.0);
        }
    }
    let noise = vars.iter().sum::<f64>() / vars.len() as f64;
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (mean, var) = (means[i], vars[i]);
            let gain = (var - noise).max(0.0) / var.max(WIENER_EPS);
            quantize(mean + gain * (v as f64 - mean))
        })
        .collect();
    Ok(GrayImage::new(w, h, data)?
        .with_provenance_of(img)
        .with_step(format!("wiener:{window}")))
}

/// Contrast limited adaptive histogram equalization on a `tiles`×`tiles` grid.
///
/// The image is extended by reflection on the right and bottom so the grid
/// divides it evenly. Per-tile mappings are blended bilinearly between tile
/// centers. An infinite `clip_limit` disables clipping.
pub fn clahe(img: &GrayImage, clip_limit: f64, tiles: usize) -> Result<GrayImage> {
    if clip_limit.is_nan() || clip_limit <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "clip limit must be positive, got {clip_limit}"
        )));
    }
    if tiles == 0 {
        return Err(Error::InvalidArgument("tile grid must be non-empty".into()));
    }
    let (w, h) = (img.width(), img.height());
    let tile_w = w.div_ceil(tiles);
    let tile_h = h.div_ceil(tiles);
    if tile_w < 2 || tile_h < 2 {
        return Err(Error::InvalidArgument(format!(
            "{tiles}x{tiles} tiles on {w}x{h} gives tiles smaller than 2x2"
        )));
    }
    let tile_px = (tile_w * tile_h) as u64;
    let clip = if clip_limit.is_finite() {
        Some(((clip_limit * tile_px as f64 / 256.0) as u64).max(1))
    } else {
        None
    };

    let mut luts = vec![[0u8; 256]; tiles * tiles];
    for ty in 0..tiles {
        for tx in 0..tiles {
            let mut hist = [0u64; 256];
            for y in ty * tile_h..(ty + 1) * tile_h {
                let yy = reflect_index(y as i64, h);
                for x in tx * tile_w..(tx + 1) * tile_w {
                    hist[img.get(reflect_index(x as i64, w), yy) as usize] += 1;
                }
            }
            if let Some(limit) = clip {
                clip_histogram(&mut hist, limit);
            }
            luts[ty * tiles + tx] = equalization_lut(&hist);
        }
    }

    let axis = |p: usize, size: usize| -> (usize, usize, f64) {
        let g = (p as f64 + 0.5) / size as f64 - 0.5;
        if g <= 0.0 {
            (0, 0, 0.0)
        } else if g >= (tiles - 1) as f64 {
            (tiles - 1, tiles - 1, 0.0)
        } else {
            let i = g.floor() as usize;
            (i, i + 1, g - i as f64)
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = axis(y, tile_h);
        for x in 0..w {
            let (x0, x1, fx) = axis(x, tile_w);
            let v = img.get(x, y) as usize;
            let at = |tx: usize, ty: usize| luts[ty * tiles + tx][v] as f64;
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            out.push(quantize(top * (1.0 - fy) + bottom * fy));
        }
    }
    Ok(GrayImage::new(w, h, out)?
        .with_provenance_of(img)
        .with_step(format!("clahe:{clip_limit}:{tiles}")))
}

fn clip_histogram(hist: &mut [u64; 256], limit: u64) {
    let mut excess = 0;
    for bin in hist.iter_mut() {
        if *bin > limit {
            excess += *bin - limit;
            *bin = limit;
        }
    }
    let batch = excess / 256;
    let residual = excess % 256;
    for bin in hist.iter_mut() {
        *bin += batch;
    }
    if residual > 0 {
        let step = (256 / residual as usize).max(1);
        for bin in hist.iter_mut().step_by(step).take(residual as usize) {
            *bin += 1;
        }
    }
}

/// `(cdf(v) - cdf_min) * 255 / (N - cdf_min)`; single-level histograms map identically.
fn equalization_lut(hist: &[u64; 256]) -> [u8; 256] {
    let total: u64 = hist.iter().sum();
    let mut lut = [0u8; 256];
    let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let denom = total - cdf_min;
    let mut cdf = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count;
        lut[v] = if denom == 0 {
            v as u8
        } else {
            quantize(cdf.saturating_sub(cdf_min) as f64 * 255.0 / denom as f64)
        };
    }
    lut
}

/// Wiener filter then CLAHE, tagging the result with [`ENHANCED_TAG`].
///
/// Refuses images that already carry the tag.
pub fn enhance_pipeline(img: &GrayImage, params: &EnhanceParams) -> Result<GrayImage> {
    if img.has_step(ENHANCED_TAG) {
        return Err(Error::InvalidArgument(
            "image has already been enhanced".into(),
        ));
    }
    let denoised = wiener_filter(img, params.wiener_window)?;
    Ok(clahe(&denoised, params.clahe_clip, params.clahe_tiles)?.with_step(ENHANCED_TAG))
}
