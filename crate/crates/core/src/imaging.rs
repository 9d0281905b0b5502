//! Grayscale rasters, decoding, geometry and first-order statistics.
//!
//! [`GrayImage`] stores 8-bit intensities. Numerical transforms work on a
//! [`Plane`] of `f64` samples, normally the `[0, 1]` float view obtained from
//! [`GrayImage::to_unit_plane`].

use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image with a record of the operations applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
    provenance: Vec<String>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "buffer holds {} pixels, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            provenance: Vec::new(),
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("non-zero dimensions")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("non-zero dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn has_step(&self, step: &str) -> bool {
        self.provenance.iter().any(|s| s == step)
    }

    pub fn push_step(&mut self, step: impl Into<String>) {
        self.provenance.push(step.into());
    }

    pub fn with_step(mut self, step: impl Into<String>) -> Self {
        self.push_step(step);
        self
    }

    pub(crate) fn with_provenance_of(mut self, other: &GrayImage) -> Self {
        self.provenance = other.provenance.clone();
        self
    }

    /// Float view with intensities divided by 255.
    pub fn to_unit_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    /// Plane holding the raw 8-bit values as `f64`.
    pub fn to_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Quantizes a plane on the 8-bit scale, rounding and clamping to `[0, 255]`.
    pub fn from_plane(plane: &Plane) -> Self {
        let data = plane.data.iter().map(|&v| quantize(v)).collect();
        Self::new(plane.width, plane.height, data).expect("plane dimensions are valid")
    }

    /// Point-wise complement `255 - v`.
    pub fn inverted(&self) -> Self {
        let data = self.data.iter().map(|&v| 255 - v).collect();
        Self::new(self.width, self.height, data)
            .unwrap()
            .with_provenance_of(self)
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Row-major grid of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at a fractional position; samples outside the grid read as 0.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let at = |xi: i64, yi: i64| -> f64 {
            if xi < 0 || yi < 0 || xi >= self.width as i64 || yi >= self.height as i64 {
                0.0
            } else {
                self.data[yi as usize * self.width + xi as usize]
            }
        };
        let top = lerp(at(x0, y0), at(x0 + 1, y0), fx);
        let bottom = lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), fx);
        lerp(top, bottom, fy)
    }
}

#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

/// Reflects an out-of-range index back into `0..n` without repeating the edge sample.
#[inline]
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Decodes a PNG, BMP, PGM or JPEG file into an 8-bit grayscale image.
///
/// Color inputs are converted with BT.601 luma weights.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Bmp | ImageFormat::Pnm | ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "`{}` has zero dimension",
            path.display()
        )));
    }
    let data = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma_bt601(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    Ok(GrayImage::new(width, height, data)?.with_step(format!("load:{}", path.display())))
}

/// ITU-R BT.601 luma of an RGB triple, rounded to the nearest level.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    quantize(0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
}

/// Writes the image as an 8-bit grayscale PNG.
pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, img.data.clone())
        .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::InvalidImage(other.to_string()),
        })
}

/// Rotates a plane counter-clockwise (as displayed) by `theta` degrees about its
/// center. Output keeps the input dimensions; uncovered samples are 0.
pub fn rotate_plane(plane: &Plane, theta: f64) -> Plane {
    let cx = (plane.width as f64 - 1.0) / 2.0;
    let cy = (plane.height as f64 - 1.0) / 2.0;
    let (sin, cos) = theta.to_radians().sin_cos();
    // Inverse map: destination offset (dx, dy) in image coordinates (y down)
    // comes from the source rotated clockwise on screen by theta.
    Plane::from_fn(plane.width, plane.height, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let sx = cx + cos * dx - sin * dy;
        let sy = cy + sin * dx + cos * dy;
        plane.sample_bilinear(snap(sx), snap(sy))
    })
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Rotates an image counter-clockwise by `theta` degrees about its center with
/// bilinear interpolation; pixels sampled from outside the frame become 0.
pub fn rotate(img: &GrayImage, theta: f64) -> GrayImage {
    if theta.rem_euclid(360.0) == 0.0 {
        return img.clone().with_step("rotate:0");
    }
    GrayImage::from_plane(&rotate_plane(&img.to_plane(), theta))
        .with_provenance_of(img)
        .with_step(format!("rotate:{theta:.4}"))
}

/// Copies the `w`×`h` window whose top-left corner is `(x, y)`.
pub fn crop(img: &GrayImage, x: usize, y: usize, w: usize, h: usize) -> Result<GrayImage> {
    if w == 0 || h == 0 || x + w > img.width || y + h > img.height {
        return Err(Error::OutOfBounds {
            x,
            y,
            w,
            h,
            width: img.width,
            height: img.height,
        });
    }
    let mut data = Vec::with_capacity(w * h);
    for row in y..y + h {
        let start = row * img.width + x;
        data.extend_from_slice(&img.data[start..start + w]);
    }
    Ok(GrayImage::new(w, h, data)?
        .with_provenance_of(img)
        .with_step(format!("crop:{x},{y},{w},{h}")))
}

/// Population mean and variance on the 8-bit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub mean: f64,
    pub variance: f64,
}

pub fn image_stats(img: &GrayImage) -> ImageStats {
    let n = img.data.len() as f64;
    let mean = img.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let variance = img
        .data
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    ImageStats { mean, variance }
}

/// Equal-width intensity histogram. `edges` has `bin_count + 1` entries spanning `[0, 256)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn bin_count(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Counts intensities into `bins` equal-width bins; bin `k` holds levels
/// `v` with `floor(v * bins / 256) == k`.
pub fn histogram(img: &GrayImage, bins: usize, normalize: bool) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    let mut counts = vec![0u64; bins];
    for &v in &img.data {
        counts[v as usize * bins / 256] += 1;
    }
    let total = img.data.len() as f64;
    let mass = counts
        .iter()
        .map(|&c| if normalize { c as f64 / total } else { c as f64 })
        .collect();
    let edges = (0..=bins).map(|k| k as f64 * 256.0 / bins as f64).collect();
    Ok(Histogram { edges, mass })
}
