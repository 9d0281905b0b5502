//! Local entropy: a histogram of per-tile intensity entropies.

use crate::error::Result;
use crate::imaging::GrayImage;

use super::{check_min_side, DescriptorId, FeatureVector, MIN_DESCRIPTOR_SIDE};

/// Tiles per side.
pub const LE_GRID: usize = 4;
pub const LE_BINS: usize = 16;
const MAX_BITS: f64 = 8.0;

/// Shannon entropy (bits) of a count histogram.
pub fn shannon_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Splits `n` into `LE_GRID` spans; the last one absorbs the remainder.
pub(crate) fn tile_spans(n: usize) -> Vec<(usize, usize)> {
    let base = n / LE_GRID;
    (0..LE_GRID)
        .map(|i| {
            let start = i * base;
            let end = if i + 1 == LE_GRID { n } else { start + base };
            (start, end)
        })
        .collect()
}

/// Entropies of the 4x4 tiles, row-major.
pub(crate) fn tile_entropies(img: &GrayImage) -> Vec<f64> {
    let xs = tile_spans(img.width());
    let ys = tile_spans(img.height());
    let mut out = Vec::with_capacity(LE_GRID * LE_GRID);
    for &(y0, y1) in &ys {
        for &(x0, x1) in &xs {
            let mut counts = [0u64; 256];
            for y in y0..y1 {
                for x in x0..x1 {
                    counts[img.get(x, y) as usize] += 1;
                }
            }
            out.push(shannon_bits(&counts));
        }
    }
    out
}

/// Normalized 16-bin histogram of tile entropies over `[0, 8]` bits.
pub fn le(img: &GrayImage) -> Result<FeatureVector> {
    check_min_side(img, MIN_DESCRIPTOR_SIDE, "LE")?;
    let entropies = tile_entropies(img);
    let mut mass = vec![0.0; LE_BINS];
    for e in &entropies {
        let bin = ((e / MAX_BITS * LE_BINS as f64).floor() as usize).min(LE_BINS - 1);
        mass[bin] += 1.0;
    }
    let n = entropies.len() as f64;
    mass.iter_mut().for_each(|m| *m /= n);
    Ok(FeatureVector::new(DescriptorId::Le, mass))
}
