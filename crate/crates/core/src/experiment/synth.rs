//! Surrogate sensor datasets: vein-like finger images with per-class
//! acquisition signatures.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{save_png, GrayImage, Plane};
use crate::roi::{RoiMethod, RoiParams, RoiSpec};

use super::config::{ClassSource, ExperimentConfig};

/// Acquisition characteristics applied on top of the finger content.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSignature {
    pub gamma: f64,
    /// Additive Gaussian noise, 8-bit units.
    pub noise_sigma: f64,
    /// Box blur radius in pixels.
    pub blur_radius: usize,
    /// Intensity offset, 8-bit units.
    pub brightness: f64,
    /// Relative darkening at the frame corners.
    pub vignetting: f64,
}

impl SensorSignature {
    pub const NEUTRAL: SensorSignature = SensorSignature {
        gamma: 1.0,
        noise_sigma: 0.0,
        blur_radius: 0,
        brightness: 0.0,
        vignetting: 0.0,
    };
}

/// Where the signature is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureScope {
    Full,
    /// Only outside the finger; the finger keeps neutral acquisition.
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub scope: SignatureScope,
    /// One signature per class; spread defaults when absent.
    pub signatures: Option<Vec<SensorSignature>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 8,
            per_class: 120,
            width: 160,
            height: 120,
            seed: 42,
            scope: SignatureScope::Full,
            signatures: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub label: String,
    pub dir: PathBuf,
    pub signature: SensorSignature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub classes: Vec<SynthClass>,
    /// ROI geometry that fits inside the synthetic finger.
    pub roi: RoiSpec,
}

pub fn class_label(k: usize) -> String {
    format!("sensor{:02}", k + 1)
}

fn spread(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if n == 1 {
        return lo;
    }
    lo + (hi - lo) * k as f64 / (n - 1) as f64
}

/// Evenly spaced attribute levels, each attribute permuted independently so
/// classes do not differ along a single axis.
pub fn default_signatures(classes: usize, seed: u64) -> Vec<SensorSignature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_4e41_5455_5245);
    let mut perm = || {
        let mut p: Vec<usize> = (0..classes).collect();
        p.shuffle(&mut rng);
        p
    };
    let (g, s, b, o, v) = (perm(), perm(), perm(), perm(), perm());
    (0..classes)
        .map(|k| SensorSignature {
            gamma: spread(0.75, 1.35, g[k], classes),
            noise_sigma: spread(1.0, 8.0, s[k], classes),
            blur_radius: b[k] % 3,
            brightness: spread(-25.0, 25.0, o[k], classes),
            vignetting: spread(0.0, 0.45, v[k], classes),
        })
        .collect()
}

/// ROI that stays inside the finger band of a `width`×`height` sample.
pub fn suggested_roi(width: usize, height: usize) -> RoiSpec {
    RoiSpec {
        dataset_id: "synthetic".into(),
        method: RoiMethod::ActiveContour,
        out_w: (width * 3 / 5).max(16),
        out_h: (height / 3).max(16),
        params: RoiParams::default(),
    }
}

struct Scene {
    /// Neutral intensities, 8-bit scale.
    base: Plane,
    /// 1 inside the finger, 0 outside, soft at the edge.
    finger: Plane,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn render_scene(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Scene {
    let cy = h as f64 / 2.0 + rng.random_range(-0.04..0.04) * h as f64;
    let slope = rng.random_range(-0.05f64..0.05);
    let half = h as f64 * rng.random_range(0.28..0.33);
    let bg = rng.random_range(35.0..50.0);
    let skin = rng.random_range(145.0..165.0);

    // Veins: smooth curves running along the finger.
    let veins: Vec<[f64; 6]> = (0..rng.random_range(3..6))
        .map(|_| {
            [
                rng.random_range(-0.6..0.6),         // offset from axis, in half-widths
                rng.random_range(0.1..0.35),         // amplitude, in half-widths
                rng.random_range(1.0..3.0),          // periods across the frame
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(1.2..2.5),          // line half-width
                rng.random_range(18.0..35.0),        // depth
            ]
        })
        .collect();
    let grain: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut base = Plane::zeros(w, h);
    let mut finger = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let axis = cy + slope * (x as f64 - w as f64 / 2.0);
            let d = (y as f64 - axis) / half;
            let inside = smoothstep((1.0 - d.abs()) / 0.08);
            let profile = skin * (1.0 - 0.35 * d * d);
            let mut v = bg + 10.0 * (x as f64 / w as f64) + inside * (profile - bg);
            for vein in &veins {
                let u = x as f64 / w as f64;
                let path = vein[0] + vein[1] * (std::f64::consts::TAU * vein[2] * u + vein[3]).sin();
                let dist = (d - path).abs() * half;
                v -= inside * vein[5] * (-(dist * dist) / (2.0 * vein[4] * vein[4])).exp();
            }
            base.set(x, y, v + 2.0 * grain[y * w + x]);
            finger.set(x, y, inside);
        }
    }
    Scene { base, finger }
}

fn box_blur(p: &Plane, r: usize) -> Plane {
    if r == 0 {
        return p.clone();
    }
    let (w, h) = (p.width, p.height);
    let pass = |src: &Plane, horizontal: bool| {
        Plane::from_fn(w, h, |x, y| {
            let mut s = 0.0;
            for k in -(r as isize)..=r as isize {
                let (sx, sy) = if horizontal {
                    ((x as isize + k).clamp(0, w as isize - 1) as usize, y)
                } else {
                    (x, (y as isize + k).clamp(0, h as isize - 1) as usize)
                };
                s += src.get(sx, sy);
            }
            s / (2 * r + 1) as f64
        })
    };
    pass(&pass(p, true), false)
}

fn apply_signature(p: &Plane, sig: &SensorSignature, rng: &mut ChaCha8Rng) -> Plane {
    let (w, h) = (p.width, p.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let r2max = cx * cx + cy * cy;
    let shaped = Plane::from_fn(w, h, |x, y| {
        let v = (p.get(x, y) / 255.0).clamp(0.0, 1.0).powf(sig.gamma) * 255.0;
        let r2 = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / r2max;
        v * (1.0 - sig.vignetting * r2) + sig.brightness
    });
    let mut out = box_blur(&shaped, sig.blur_radius);
    if sig.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, sig.noise_sigma).expect("sigma is finite");
        for v in out.data.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    out
}

/// One sample of a class.
pub fn render_sample(cfg: &SynthConfig, sig: &SensorSignature, class: usize, index: usize) -> GrayImage {
    let stream = ((class as u64) << 32) | index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let scene = render_scene(cfg.width, cfg.height, &mut rng);
    let acquired = apply_signature(&scene.base, sig, &mut rng);
    let out = match cfg.scope {
        SignatureScope::Full => acquired,
        SignatureScope::Background => Plane::from_fn(cfg.width, cfg.height, |x, y| {
            let f = scene.finger.get(x, y);
            f * scene.base.get(x, y) + (1.0 - f) * acquired.get(x, y)
        }),
    };
    GrayImage::from_plane(&out)
}

fn signatures(cfg: &SynthConfig) -> Result<Vec<SensorSignature>> {
    if cfg.classes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {}", cfg.classes)));
    }
    match &cfg.signatures {
        Some(s) if s.len() != cfg.classes => Err(Error::InvalidArgument(format!(
            "{} signatures for {} classes",
            s.len(),
            cfg.classes
        ))),
        Some(s) => Ok(s.clone()),
        None => Ok(default_signatures(cfg.classes, cfg.seed)),
    }
}

/// Writes `<out>/<label>/NNNN.png` for every class, `manifest.json` with the
/// signatures, and `config.json`, a ready-to-run experiment config.
pub fn synth_sensors(cfg: &SynthConfig, out: impl AsRef<Path>) -> Result<SynthManifest> {
    let out = out.as_ref();
    let sigs = signatures(cfg)?;
    if cfg.width < 64 || cfg.height < 48 || cfg.per_class == 0 {
        return Err(Error::InvalidArgument("synthetic samples need at least 64x48 and one per class".into()));
    }
    let classes: Vec<SynthClass> = sigs
        .iter()
        .enumerate()
        .map(|(k, &signature)| SynthClass {
            label: class_label(k),
            dir: PathBuf::from(class_label(k)),
            signature,
        })
        .collect();
    for c in &classes {
        let dir = out.join(&c.dir);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.classes)
        .flat_map(|k| (0..cfg.per_class).map(move |i| (k, i)))
        .collect();
    jobs.par_iter().try_for_each(|&(k, i)| {
        let img = render_sample(cfg, &sigs[k], k, i);
        save_png(&img, out.join(&classes[k].dir).join(format!("{i:04}.png")))
    })?;

    let manifest = SynthManifest {
        config: cfg.clone(),
        classes,
        roi: suggested_roi(cfg.width, cfg.height),
    };
    let write = |name: &str, text: String| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("manifest.json", serde_json::to_string_pretty(&manifest)?)?;
    let experiment = ExperimentConfig {
        classes: manifest
            .classes
            .iter()
            .map(|c| ClassSource { label: c.label.clone(), path: c.dir.clone(), roi: None })
            .collect(),
        samples_per_class: cfg.per_class,
        seed: cfg.seed,
        roi: manifest.roi.clone(),
        output_dir: PathBuf::from("results"),
        ..Default::default()
    };
    write("config.json", serde_json::to_string_pretty(&experiment)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{image_stats, load_image};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { classes: 3, per_class: 2, width: 80, height: 60, seed, ..Default::default() }
    }

    fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn fixed_seed_gives_identical_tree() {
        let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        synth_sensors(&small(9), a.path()).unwrap();
        synth_sensors(&small(9), b.path()).unwrap();
        synth_sensors(&small(10), c.path()).unwrap();
        let ta = tree_bytes(a.path());
        assert_eq!(ta.len(), 3 * 2 + 2);
        assert_eq!(ta, tree_bytes(b.path()));
        assert_ne!(ta, tree_bytes(c.path()));
        let cfg = ExperimentConfig::load(a.path().join("config.json")).unwrap();
        assert_eq!(cfg.classes.len(), 3);
        assert!(cfg.classes[0].path.starts_with(a.path()));
    }

    #[test]
    fn brightness_orders_class_means() {
        let offsets = [20.0, -20.0, 0.0, 10.0];
        let cfg = SynthConfig {
            classes: 4,
            per_class: 6,
            signatures: Some(
                offsets
                    .iter()
                    .map(|&brightness| SensorSignature { brightness, noise_sigma: 2.0, ..SensorSignature::NEUTRAL })
                    .collect(),
            ),
            ..small(5)
        };
        let dir = tempfile::tempdir().unwrap();
        let m = synth_sensors(&cfg, dir.path()).unwrap();
        let stats = crate::experiment::dataset::dataset_stats(
            &crate::experiment::dataset::ingest(&ExperimentConfig {
                data_root: Some(dir.path().to_path_buf()),
                min_samples_per_class: 2,
                ..Default::default()
            })
            .unwrap(),
        )
        .unwrap();
        let mut by_offset: Vec<(f64, f64)> = m
            .classes
            .iter()
            .zip(&stats)
            .map(|(c, s)| {
                assert_eq!(c.label, s.dataset_label);
                (c.signature.brightness, s.luminance.median)
            })
            .collect();
        by_offset.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(by_offset.windows(2).all(|w| w[0].1 < w[1].1), "{by_offset:?}");
    }

    #[test]
    fn background_scope_leaves_finger_neutral() {
        let sig = SensorSignature { brightness: 40.0, noise_sigma: 0.0, ..SensorSignature::NEUTRAL };
        let full = SynthConfig { signatures: Some(vec![sig; 2]), classes: 2, ..small(1) };
        let bg = SynthConfig { scope: SignatureScope::Background, ..full.clone() };
        let neutral = SynthConfig { signatures: Some(vec![SensorSignature::NEUTRAL; 2]), ..full.clone() };
        let (f, b, n) = (render_sample(&full, &sig, 0, 0), render_sample(&bg, &sig, 0, 0), render_sample(&neutral, &SensorSignature::NEUTRAL, 0, 0));
        // Centre row lies inside the finger, the top row outside.
        let (cx, cy) = (40, 30);
        assert_eq!(b.get(cx, cy), n.get(cx, cy));
        assert!(f.get(cx, cy) > n.get(cx, cy));
        assert!(b.get(cx, 0) as i32 - n.get(cx, 0) as i32 >= 35);
    }

    #[test]
    fn default_signatures_are_distinct_and_seeded() {
        let s = default_signatures(8, 42);
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(s, default_signatures(8, 42));
        let mut sig: Vec<f64> = s.iter().map(|x| x.noise_sigma).collect();
        sig.sort_by(f64::total_cmp);
        assert_eq!(sig[0], 1.0);
        assert_eq!(sig[7], 8.0);
        assert!(synth_sensors(&SynthConfig { classes: 1, ..small(0) }, tempfile::tempdir().unwrap().path()).is_err());
    }

    #[test]
    fn samples_are_finger_like() {
        let cfg = small(3);
        let img = render_sample(&cfg, &SensorSignature::NEUTRAL, 0, 0);
        let finger = image_stats(&crate::imaging::crop(&img, 10, 25, 60, 10).unwrap()).mean;
        let border = image_stats(&crate::imaging::crop(&img, 0, 0, 80, 5).unwrap()).mean;
        assert!(finger > border + 60.0, "{finger} vs {border}");
        let dir = tempfile::tempdir().unwrap();
        synth_sensors(&cfg, dir.path()).unwrap();
        let back = load_image(dir.path().join("sensor01/0000.png")).unwrap();
        assert_eq!((back.width(), back.height()), (80, 60));
    }
}
