//! Canny edge detection: Gaussian smoothing, Sobel gradients, non-maximum
//! suppression and double-threshold hysteresis.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::{reflect_index, GrayImage, Plane};

use super::BinaryMask;

pub const CANNY_SIGMA: f64 = 1.4;

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

pub(crate) fn gaussian_blur(plane: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (plane.width, plane.height);
    let mut tmp = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                s += kv * plane.get(reflect_index(x as i64 + i as i64 - r, w), y);
            }
            tmp.set(x, y, s);
        }
    }
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                s += kv * tmp.get(x, reflect_index(y as i64 + i as i64 - r, h));
            }
            out.set(x, y, s);
        }
    }
    out
}

/// Sobel derivatives `(gx, gy)` with reflected borders; `gy` grows downwards.
pub(crate) fn sobel(plane: &Plane) -> (Plane, Plane) {
    let (w, h) = (plane.width, plane.height);
    let at = |x: i64, y: i64| plane.get(reflect_index(x, w), reflect_index(y, h));
    let mut gx = Plane::zeros(w, h);
    let mut gy = Plane::zeros(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            gx.set(x as usize, y as usize, dx);
            gy.set(x as usize, y as usize, dy);
        }
    }
    (gx, gy)
}

/// Canny edge map. `low` and `high` are fractions of the maximum gradient
/// magnitude; a flat image yields an empty map.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> Result<BinaryMask> {
    if !(low > 0.0 && low < high) {
        return Err(Error::InvalidArgument(format!(
            "canny thresholds need 0 < low < high, got {low}, {high}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let smooth = gaussian_blur(&img.to_unit_plane(), CANNY_SIGMA);
    let (gx, gy) = sobel(&smooth);
    let mag: Vec<f64> = gx
        .data
        .iter()
        .zip(&gy.data)
        .map(|(a, b)| a.hypot(*b))
        .collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max <= 1e-12 {
        return Ok(BinaryMask::empty(w, h));
    }
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    let mut thin = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let m = mag[y * w + x];
            if m <= 0.0 {
                continue;
            }
            let angle = gy.get(x, y).atan2(gx.get(x, y)).to_degrees().rem_euclid(180.0);
            let (ox, oy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as i64, y as i64);
            let forward = at(xi + ox, yi + oy);
            let backward = at(xi - ox, yi - oy);
            // Plateaus of equal magnitude keep their first pixel only.
            if m > backward && m >= forward {
                thin[y * w + x] = m;
            }
        }
    }

    let (lo, hi) = (low * max, high * max);
    let mut edges = BinaryMask::empty(w, h);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if thin[y * w + x] >= hi {
                edges.set(x, y, true);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !edges.get(nx, ny) && thin[ny * w + nx] >= lo {
                    edges.set(nx, ny, true);
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    Ok(edges)
}
