//! Region-based segmentation: morphological active contours without edges
//! and the level-set Chan-Vese model.
//!
//! Both return the brighter of the two phases as foreground.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Plane};

use super::BinaryMask;

/// Fraction of the frame covered by the initial ACWE rectangle.
pub const ACWE_INIT_COVERAGE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub mask: BinaryMask,
    pub iterations: usize,
    /// `false` when the iteration budget ran out before the contour settled.
    pub converged: bool,
    /// The mask is all foreground or all background.
    pub degenerate: bool,
}

impl Segmentation {
    fn finish(mask: BinaryMask, brightness: &Plane, iterations: usize, converged: bool) -> Self {
        let mask = orient_bright(mask, brightness);
        let degenerate = mask.is_empty() || mask.is_full();
        if !converged {
            log::warn!("segmentation stopped after {iterations} iterations without converging");
        }
        Segmentation {
            mask,
            iterations,
            converged,
            degenerate,
        }
    }
}

fn orient_bright(mask: BinaryMask, img: &Plane) -> BinaryMask {
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (&b, &v) in mask.bits().iter().zip(&img.data) {
        if b {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 {
        return mask;
    }
    if s_in / n_in as f64 >= s_out / n_out as f64 {
        mask
    } else {
        mask.complement()
    }
}

/// Centered rectangle covering [`ACWE_INIT_COVERAGE`] of the frame area.
pub fn centered_rectangle(width: usize, height: usize, coverage: f64) -> BinaryMask {
    let side = coverage.sqrt();
    let rw = ((width as f64 * side).round() as usize).clamp(1, width);
    let rh = ((height as f64 * side).round() as usize).clamp(1, height);
    let x0 = (width - rw) / 2;
    let y0 = (height - rh) / 2;
    BinaryMask::from_fn(width, height, |x, y| {
        x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh
    })
}

/// Morphological active contours without edges.
///
/// Each iteration moves the contour by the sign of the region-competition
/// term where the indicator has a non-zero gradient, then applies `smoothing`
/// passes of the morphological curvature operator.
pub fn morph_acwe(img: &GrayImage, iterations: usize, smoothing: usize) -> Result<Segmentation> {
    morph_acwe_from(
        img,
        &centered_rectangle(img.width(), img.height(), ACWE_INIT_COVERAGE),
        iterations,
        smoothing,
    )
}

pub fn morph_acwe_from(
    img: &GrayImage,
    init: &BinaryMask,
    iterations: usize,
    smoothing: usize,
) -> Result<Segmentation> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("ACWE needs at least one iteration".into()));
    }
    let (w, h) = (img.width(), img.height());
    if init.width() != w || init.height() != h {
        return Err(Error::InvalidArgument("initial mask size differs from image".into()));
    }
    let f = img.to_unit_plane();
    let mut u: Vec<u8> = init.bits().iter().map(|&b| b as u8).collect();
    let mut curvature_phase = 0usize;
    let mut converged = false;
    let mut done = 0;
    while done < iterations {
        done += 1;
        let before = u.clone();
        let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for (&ui, &v) in u.iter().zip(&f.data) {
            if ui == 1 {
                s1 += v;
                n1 += 1.0;
            } else {
                s0 += v;
                n0 += 1.0;
            }
        }
        let c1 = s1 / (n1 + 1e-8);
        let c0 = s0 / (n0 + 1e-8);
        let prev = u.clone();
        for y in 0..h {
            for x in 0..w {
                let gx = central_diff(&prev, w, h, x, y, true);
                let gy = central_diff(&prev, w, h, x, y, false);
                let grad = gx.abs() + gy.abs();
                if grad == 0.0 {
                    continue;
                }
                let v = f.get(x, y);
                let aux = grad * ((v - c1).powi(2) - (v - c0).powi(2));
                if aux < 0.0 {
                    u[y * w + x] = 1;
                } else if aux > 0.0 {
                    u[y * w + x] = 0;
                }
            }
        }
        for _ in 0..smoothing {
            u = if curvature_phase % 2 == 0 {
                sup_inf(&inf_sup(&u, w, h), w, h)
            } else {
                inf_sup(&sup_inf(&u, w, h), w, h)
            };
            curvature_phase += 1;
        }
        if u == before {
            converged = true;
            break;
        }
    }
    let mask = BinaryMask::from_bits(w, h, u.iter().map(|&v| v == 1).collect());
    Ok(Segmentation::finish(mask, &f, done, converged))
}

/// `numpy.gradient`-style derivative of a 0/1 field: central inside, one-sided at the border.
fn central_diff(u: &[u8], w: usize, h: usize, x: usize, y: usize, along_x: bool) -> f64 {
    let (n, i) = if along_x { (w, x) } else { (h, y) };
    if n < 2 {
        return 0.0;
    }
    let at = |k: usize| -> f64 {
        if along_x {
            u[y * w + k] as f64
        } else {
            u[k * w + x] as f64
        }
    };
    if i == 0 {
        at(1) - at(0)
    } else if i == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        (at(i + 1) - at(i - 1)) / 2.0
    }
}

const LINES: [[(i64, i64); 2]; 4] = [
    [(-1, 0), (1, 0)],
    [(0, -1), (0, 1)],
    [(-1, -1), (1, 1)],
    [(-1, 1), (1, -1)],
];

#[inline]
fn clamped(u: &[u8], w: usize, h: usize, x: i64, y: i64) -> u8 {
    let x = x.clamp(0, w as i64 - 1) as usize;
    let y = y.clamp(0, h as i64 - 1) as usize;
    u[y * w + x]
}

/// Supremum over the four line elements of the erosion by that element.
fn sup_inf(u: &[u8], w: usize, h: usize) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            if u[y * w + x] == 0 {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let any = LINES.iter().any(|line| {
                line.iter()
                    .all(|&(dx, dy)| clamped(u, w, h, xi + dx, yi + dy) == 1)
            });
            out[y * w + x] = any as u8;
        }
    }
    out
}

/// Infimum over the four line elements of the dilation by that element.
fn inf_sup(u: &[u8], w: usize, h: usize) -> Vec<u8> {
    let mut out = vec![1u8; w * h];
    for y in 0..h {
        for x in 0..w {
            if u[y * w + x] == 1 {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let all = LINES.iter().all(|line| {
                line.iter()
                    .any(|&(dx, dy)| clamped(u, w, h, xi + dx, yi + dy) == 1)
            });
            out[y * w + x] = all as u8;
        }
    }
    out
}

/// Parameters of the level-set Chan-Vese model (intensities rescaled to `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanVeseParams {
    pub mu: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub dt: f64,
}

impl Default for ChanVeseParams {
    fn default() -> Self {
        Self {
            mu: 0.25,
            tol: 1e-3,
            max_iter: 300,
            dt: 0.5,
        }
    }
}

/// Chan-Vese segmentation with a semi-implicit Gauss-Seidel update,
/// checkerboard initialization and the sign of the level set as output.
pub fn chan_vese(img: &GrayImage, mu: f64, tol: f64, max_iter: usize) -> Result<Segmentation> {
    chan_vese_with(
        img,
        &ChanVeseParams {
            mu,
            tol,
            max_iter,
            ..ChanVeseParams::default()
        },
    )
}

pub fn chan_vese_with(img: &GrayImage, params: &ChanVeseParams) -> Result<Segmentation> {
    if params.max_iter == 0 {
        return Err(Error::InvalidArgument("Chan-Vese needs at least one iteration".into()));
    }
    const ETA: f64 = 1e-8;
    const EPS: f64 = 1.0;
    let (w, h) = (img.width(), img.height());
    let raw = img.to_unit_plane();
    let lo = raw.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let f: Vec<f64> = raw
        .data
        .iter()
        .map(|&v| if range > 0.0 { (v - lo) / range } else { 0.0 })
        .collect();
    let mut phi: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            (std::f64::consts::PI / 5.0 * x).sin() * (std::f64::consts::PI / 5.0 * y).sin()
        })
        .collect();

    let idx = |x: usize, y: usize| y * w + x;
    let mut converged = false;
    let mut done = 0;
    while done < params.max_iter {
        done += 1;
        let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
        for (&p, &v) in phi.iter().zip(&f) {
            if p >= 0.0 {
                s1 += v;
                n1 += 1;
            } else {
                s2 += v;
                n2 += 1;
            }
        }
        let c1 = if n1 > 0 { s1 / n1 as f64 } else { 0.0 };
        let c2 = if n2 > 0 { s2 / n2 as f64 } else { 0.0 };
        let old = phi.clone();
        for y in 0..h {
            let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let p = phi[idx(x, y)];
                let east = phi[idx(xp, y)];
                let west = phi[idx(xm, y)];
                let south = phi[idx(x, yp)];
                let north = phi[idx(x, ym)];
                let c_east = 1.0 / (ETA * ETA + (east - p).powi(2) + ((south - north) / 2.0).powi(2)).sqrt();
                let c_west = {
                    let sw = phi[idx(xm, yp)];
                    let nw = phi[idx(xm, ym)];
                    1.0 / (ETA * ETA + (p - west).powi(2) + ((sw - nw) / 2.0).powi(2)).sqrt()
                };
                let c_south = 1.0 / (ETA * ETA + ((east - west) / 2.0).powi(2) + (south - p).powi(2)).sqrt();
                let c_north = {
                    let ne = phi[idx(xp, ym)];
                    let nw = phi[idx(xm, ym)];
                    1.0 / (ETA * ETA + ((ne - nw) / 2.0).powi(2) + (p - north).powi(2)).sqrt()
                };
                let delta = params.dt * EPS / (std::f64::consts::PI * (EPS * EPS + p * p));
                let v = f[idx(x, y)];
                let num = p + delta
                    * (params.mu * (c_east * east + c_west * west + c_south * south + c_north * north)
                        - (v - c1).powi(2)
                        + (v - c2).powi(2));
                let den = 1.0 + delta * params.mu * (c_east + c_west + c_south + c_north);
                phi[idx(x, y)] = num / den;
            }
        }
        let change = (phi
            .iter()
            .zip(&old)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / phi.len() as f64)
            .sqrt();
        if change < params.tol {
            converged = true;
            break;
        }
    }
    let mut mask = BinaryMask::from_bits(w, h, phi.iter().map(|&p| p >= 0.0).collect());
    // The level-set flow can stall in a local minimum (e.g. the straight
    // checkerboard boundaries under a dominant length term); fall back to the
    // single-region partition whenever it has lower energy.
    if single_region_energy(&f) <= chan_vese_energy(&mask, &f, params.mu) {
        mask = BinaryMask::empty(w, h);
    }
    Ok(Segmentation::finish(mask, &raw, done, converged))
}

/// Two-phase piecewise-constant energy: `mu` times the boundary length
/// (4-neighbour pixel edges) plus the squared deviation from each phase mean.
pub(crate) fn chan_vese_energy(mask: &BinaryMask, f: &[f64], mu: f64) -> f64 {
    let (w, h) = (mask.width(), mask.height());
    let mut length = 0usize;
    for y in 0..h {
        for x in 0..w {
            let b = mask.get(x, y);
            if x + 1 < w && mask.get(x + 1, y) != b {
                length += 1;
            }
            if y + 1 < h && mask.get(x, y + 1) != b {
                length += 1;
            }
        }
    }
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for (&b, &v) in mask.bits().iter().zip(f) {
        if b {
            s1 += v;
            n1 += 1.0;
        } else {
            s0 += v;
            n0 += 1.0;
        }
    }
    let c1 = if n1 > 0.0 { s1 / n1 } else { 0.0 };
    let c0 = if n0 > 0.0 { s0 / n0 } else { 0.0 };
    let fit: f64 = mask
        .bits()
        .iter()
        .zip(f)
        .map(|(&b, &v)| if b { (v - c1).powi(2) } else { (v - c0).powi(2) })
        .sum();
    mu * length as f64 + fit
}

fn single_region_energy(f: &[f64]) -> f64 {
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    f.iter().map(|v| (v - mean).powi(2)).sum()
}
