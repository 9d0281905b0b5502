use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{crop, rotate, GrayImage};

use super::morphology::label_components;
use super::{
    canny, chan_vese_with, close, dilate, fill_contour, fit_axis, mass_center, morph_acwe,
    BinaryMask, RoiMethod, RoiSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRoi {
    pub image: GrayImage,
    /// Estimated finger axis before alignment, degrees counter-clockwise.
    pub theta: f64,
    /// Centroid of the aligned finger region.
    pub center: (f64, f64),
    pub rect: Rect,
    /// The crop window had to be shifted to stay inside the frame.
    pub clamped: bool,
    pub converged: bool,
    pub axis_degenerate: bool,
}

fn check_fits(spec: &RoiSpec, w: usize, h: usize) -> Result<()> {
    if spec.out_w == 0 || spec.out_h == 0 || spec.out_w > w || spec.out_h > h {
        return Err(Error::InvalidArgument(format!(
            "ROI {}x{} does not fit a {w}x{h} sample",
            spec.out_w, spec.out_h
        )));
    }
    Ok(())
}

/// Segments the finger, fills its closed outline, rotates the sample so the
/// principal axis is horizontal and crops `out_w`×`out_h` around the new centroid.
pub fn extract_roi_aligned(img: &GrayImage, spec: &RoiSpec) -> Result<AlignedRoi> {
    let (w, h) = (img.width(), img.height());
    check_fits(spec, w, h)?;
    let p = &spec.params;
    let seg = match spec.method {
        RoiMethod::ActiveContour => morph_acwe(img, p.acwe_iterations, p.acwe_smoothing)?,
        RoiMethod::ChanVese => chan_vese_with(img, &p.chan_vese)?,
        RoiMethod::CommonPatch => {
            return Err(Error::InvalidArgument(
                "common-patch ROI needs the whole dataset; use extract_roi_common".into(),
            ))
        }
    };
    if seg.degenerate {
        return Err(Error::Segmentation(format!(
            "degenerate segmentation of {}",
            img.provenance().first().map(String::as_str).unwrap_or("sample")
        )));
    }
    let outline = close(
        &canny(&seg.mask.to_image(), p.canny_low, p.canny_high)?,
        p.closing_radius,
    )?;
    let region = match fill_contour(&outline) {
        Ok(r) if r.count() * 2 >= seg.mask.count() => r,
        _ => fill_contour(&seg.mask)?,
    };
    let axis = fit_axis(&region)?;
    let aligned = rotate(img, -axis.theta);
    let aligned_region = region.rotated(-axis.theta);
    let center = mass_center(&aligned_region)?;

    let place = |c: f64, size: usize, limit: usize| -> (usize, bool) {
        let ideal = (c - (size as f64 - 1.0) / 2.0).round();
        let max = (limit - size) as f64;
        let pos = ideal.clamp(0.0, max);
        (pos as usize, pos != ideal)
    };
    let (x0, cx) = place(center.0, spec.out_w, w);
    let (y0, cy) = place(center.1, spec.out_h, h);
    let clamped = cx || cy;
    if clamped {
        log::warn!("ROI window clamped to the frame for dataset {}", spec.dataset_id);
    }
    let image = crop(&aligned, x0, y0, spec.out_w, spec.out_h)?.with_step(format!(
        "roi:{}",
        serde_json::to_string(&spec.method).unwrap_or_default().trim_matches('"')
    ));
    Ok(AlignedRoi {
        image,
        theta: axis.theta,
        center,
        rect: Rect {
            x: x0,
            y: y0,
            w: spec.out_w,
            h: spec.out_h,
        },
        clamped,
        converged: seg.converged,
        axis_degenerate: axis.degenerate,
    })
}

/// Finger region of one sample for the common-patch pipeline.
///
/// Canny edges are dilated; of the remaining 4-connected areas, the brightest
/// one large enough to hold the ROI window is taken as the finger. Returns an
/// empty mask when no area qualifies.
pub fn finger_region(img: &GrayImage, spec: &RoiSpec) -> Result<BinaryMask> {
    let p = &spec.params;
    let edges = dilate(&canny(img, p.canny_low, p.canny_high)?, p.dilation_radius)?;
    let free = edges.complement();
    let (labels, sizes) = label_components(&free);
    let mut sums = vec![0.0; sizes.len()];
    for (&l, &v) in labels.iter().zip(img.data()) {
        if l > 0 {
            sums[l as usize - 1] += v as f64;
        }
    }
    let need = spec.out_w * spec.out_h;
    let best = sizes
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= need)
        .map(|(i, &s)| (i, sums[i] / s as f64))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    Ok(match best {
        Some((i, _)) => {
            let keep = i as u32 + 1;
            BinaryMask::from_bits(
                img.width(),
                img.height(),
                labels.iter().map(|&l| l == keep).collect(),
            )
        }
        None => BinaryMask::empty(img.width(), img.height()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonRoi {
    pub rect: Rect,
    pub images: Vec<GrayImage>,
    /// Number of samples whose finger mask covers the whole rectangle.
    pub support: usize,
    /// Per-pixel count of samples marking it as finger.
    pub votes: Vec<u32>,
}

/// Integer votes accumulated over the stack: per-pixel finger counts and,
/// per window position, how many masks cover the full window.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Votes {
    pixels: Vec<u32>,
    windows: Vec<u32>,
}

impl Votes {
    fn zero(pixels: usize, windows: usize) -> Self {
        Self {
            pixels: vec![0; pixels],
            windows: vec![0; windows],
        }
    }

    fn merge(mut self, other: Votes) -> Self {
        self.pixels.iter_mut().zip(other.pixels).for_each(|(a, b)| *a += b);
        self.windows.iter_mut().zip(other.windows).for_each(|(a, b)| *a += b);
        self
    }
}

fn window_votes(mask: &BinaryMask, ww: usize, wh: usize) -> Votes {
    let (w, h) = (mask.width(), mask.height());
    let mut integral = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0;
        for x in 0..w {
            row += mask.get(x, y) as u32;
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let (nx, ny) = (w - ww + 1, h - wh + 1);
    let full = (ww * wh) as u32;
    let mut windows = vec![0u32; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            let s = integral[(y + wh) * (w + 1) + x + ww] + integral[y * (w + 1) + x]
                - integral[y * (w + 1) + x + ww]
                - integral[(y + wh) * (w + 1) + x];
            windows[y * nx + x] = (s == full) as u32;
        }
    }
    Votes {
        pixels: mask.bits().iter().map(|&b| b as u32).collect(),
        windows,
    }
}

/// Picks the `out_w`×`out_h` rectangle covered by the most finger masks of the
/// stack (ties: closest to the vote centroid, then top-left first) and crops
/// every sample there.
pub fn extract_roi_common(images: &[GrayImage], spec: &RoiSpec) -> Result<CommonRoi> {
    if spec.method != RoiMethod::CommonPatch {
        return Err(Error::InvalidArgument(
            "extract_roi_common expects the common-patch method".into(),
        ));
    }
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty image stack".into()))?;
    let (w, h) = (first.width(), first.height());
    if images.iter().any(|i| i.width() != w || i.height() != h) {
        return Err(Error::InvalidArgument(
            "all samples of a stack must share dimensions".into(),
        ));
    }
    check_fits(spec, w, h)?;
    let (ww, wh) = (spec.out_w, spec.out_h);
    let (nx, ny) = (w - ww + 1, h - wh + 1);
    let votes = images
        .par_iter()
        .map(|img| finger_region(img, spec).map(|m| window_votes(&m, ww, wh)))
        .try_reduce(|| Votes::zero(w * h, nx * ny), |a, b| Ok(a.merge(b)))?;

    let total: f64 = votes.pixels.iter().map(|&v| v as f64).sum();
    let centroid = if total > 0.0 {
        let (mut sx, mut sy) = (0.0, 0.0);
        for (i, &v) in votes.pixels.iter().enumerate() {
            sx += (i % w) as f64 * v as f64;
            sy += (i / w) as f64 * v as f64;
        }
        (sx / total, sy / total)
    } else {
        ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
    };
    let support = votes.windows.iter().copied().max().unwrap_or(0);
    if support == 0 {
        return Err(Error::Segmentation(format!(
            "no {ww}x{wh} window fits the common finger region of {}",
            spec.dataset_id
        )));
    }
    let dist = |i: usize| {
        let cx = (i % nx) as f64 + (ww as f64 - 1.0) / 2.0;
        let cy = (i / nx) as f64 + (wh as f64 - 1.0) / 2.0;
        (cx - centroid.0).powi(2) + (cy - centroid.1).powi(2)
    };
    let best = (0..votes.windows.len())
        .filter(|&i| votes.windows[i] == support)
        .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
        .expect("at least one window has full support");
    let rect = Rect {
        x: best % nx,
        y: best / nx,
        w: ww,
        h: wh,
    };
    let crops = images
        .iter()
        .map(|img| {
            crop(img, rect.x, rect.y, rect.w, rect.h).map(|c| c.with_step("roi:common-patch"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommonRoi {
        rect,
        images: crops,
        support: support as usize,
        votes: votes.pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::{dataset_table, RoiParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Bright rounded bar with a soft cross profile, rotated about the image center.
    pub(crate) fn finger(w: usize, h: usize, angle: f64, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, c) = angle.to_radians().sin_cos();
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let half_len = w.min(2 * h) as f64 * 0.40;
        let half_thick = h as f64 * 0.20;
        GrayImage::from_fn(w, h, |x, y| {
            let dx = x as f64 - cx;
            let dy = cy - y as f64;
            let along = dx * c + dy * s;
            let across = -dx * s + dy * c;
            let excess = (along.abs() - (half_len - half_thick)).max(0.0);
            let r = (excess * excess + across * across).sqrt();
            let noise: f64 = rng.random_range(-6.0..6.0);
            let v = if r <= half_thick {
                150.0 + 60.0 * (1.0 - (r / half_thick).powi(2)) - 25.0 * ((along / 9.0).sin() * (across / 5.0).cos()).max(0.0)
            } else {
                35.0
            };
            (v + noise).clamp(0.0, 255.0) as u8
        })
    }

    fn spec(method: RoiMethod, out_w: usize, out_h: usize) -> RoiSpec {
        RoiSpec {
            dataset_id: "synthetic".into(),
            method,
            out_w,
            out_h,
            params: RoiParams::default(),
        }
    }

    fn output_axis(img: &GrayImage) -> f64 {
        let mask = BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) > 90);
        fit_axis(&mask).unwrap().theta
    }

    #[test]
    fn tilted_finger_comes_out_horizontal() {
        let img = finger(200, 140, 20.0, 1);
        let roi = extract_roi_aligned(&img, &spec(RoiMethod::ActiveContour, 120, 80)).unwrap();
        assert_eq!((roi.image.width(), roi.image.height()), (120, 80));
        assert!((roi.theta - 20.0).abs() < 2.0, "{}", roi.theta);
        assert!(output_axis(&roi.image).abs() <= 2.0);
    }

    #[test]
    fn chan_vese_variant_aligns_too() {
        let img = finger(200, 140, -15.0, 2);
        let roi = extract_roi_aligned(&img, &spec(RoiMethod::ChanVese, 120, 80)).unwrap();
        assert!(output_axis(&roi.image).abs() <= 2.0);
    }

    #[test]
    fn aligned_finger_crops_centered_window() {
        let img = finger(200, 140, 0.0, 3);
        let roi = extract_roi_aligned(&img, &spec(RoiMethod::ActiveContour, 100, 40)).unwrap();
        assert!(roi.theta.abs() < 0.5);
        assert!((roi.rect.x as i64 - 50).abs() <= 1 && (roi.rect.y as i64 - 50).abs() <= 1, "{:?}", roi.rect);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let img = finger(100, 80, 0.0, 3);
        assert!(extract_roi_aligned(&img, &spec(RoiMethod::ActiveContour, 120, 40)).is_err());
        assert!(extract_roi_aligned(&img, &spec(RoiMethod::CommonPatch, 20, 20)).is_err());
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let img = GrayImage::filled(100, 80, 70);
        assert!(matches!(
            extract_roi_aligned(&img, &spec(RoiMethod::ActiveContour, 20, 20)),
            Err(Error::Segmentation(_))
        ));
    }

    #[test]
    fn outputs_match_published_dimensions() {
        for d in dataset_table() {
            let spec = RoiSpec::for_dataset(&d.dataset_id).unwrap();
            let (w, h) = (spec.out_w + 60, spec.out_h * 2 + 40);
            if spec.method == RoiMethod::CommonPatch {
                let imgs: Vec<_> = (0..2).map(|s| band_image(w, h, h / 4, 3 * h / 4, s)).collect();
                let out = extract_roi_common(&imgs, &spec).unwrap();
                for i in &out.images {
                    assert_eq!((i.width(), i.height()), (spec.out_w, spec.out_h), "{}", d.dataset_id);
                }
            } else {
                let mut spec = spec.clone();
                spec.params.acwe_iterations = 60;
                spec.params.chan_vese.max_iter = 60;
                let out = extract_roi_aligned(&finger(w, h, 5.0, 4), &spec).unwrap();
                assert_eq!((out.image.width(), out.image.height()), (spec.out_w, spec.out_h), "{}", d.dataset_id);
            }
        }
    }

    fn band_image(w: usize, h: usize, top: usize, bottom: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, y| {
            let base = if (top..bottom).contains(&y) { 180.0 } else { 40.0 };
            (base + rng.random_range(-5.0..5.0f64)) as u8
        })
    }

    #[test]
    fn identical_stack_crops_identically() {
        let img = band_image(160, 160, 40, 120, 9);
        let stack = vec![img.clone(), img.clone(), img];
        let out = extract_roi_common(&stack, &spec(RoiMethod::CommonPatch, 100, 50)).unwrap();
        assert_eq!(out.support, 3);
        assert!(out.images.windows(2).all(|p| p[0].data() == p[1].data()));
    }

    #[test]
    fn common_window_lies_inside_shared_band() {
        let stack: Vec<_> = (0..6)
            .map(|i| band_image(160, 180, 40 - (i % 3) * 5, 120 + (i % 2) * 15, i as u64))
            .collect();
        let out = extract_roi_common(&stack, &spec(RoiMethod::CommonPatch, 120, 50)).unwrap();
        assert!(out.rect.y >= 40 && out.rect.y + out.rect.h <= 120, "{:?}", out.rect);
        assert_eq!(out.support, 6);
    }

    #[test]
    fn no_fitting_window_is_an_error() {
        let stack = vec![band_image(100, 100, 40, 60, 1)];
        assert!(extract_roi_common(&stack, &spec(RoiMethod::CommonPatch, 80, 40)).is_err());
    }

    #[test]
    fn vote_reduction_is_order_independent() {
        let stack: Vec<_> = (0..4).map(|i| band_image(90, 90, 20 + i, 70 - i, i as u64)).collect();
        let s = spec(RoiMethod::CommonPatch, 50, 20);
        let a = extract_roi_common(&stack, &s).unwrap();
        let mut rev = stack.clone();
        rev.reverse();
        let b = extract_roi_common(&rev, &s).unwrap();
        assert_eq!(a.rect, b.rect);
        assert_eq!(a.votes, b.votes);
    }
}
