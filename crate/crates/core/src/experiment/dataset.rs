use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{image_stats, load_image, GrayImage, ImageStats};
use crate::roi::RoiSpec;

use super::config::{ClassSource, ExperimentConfig, Variant};

const IMAGE_EXTENSIONS: [&str; 7] = ["png", "bmp", "pgm", "ppm", "pnm", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleRecord {
    pub path: PathBuf,
    pub dataset_label: String,
    pub variant: Variant,
}

impl SampleRecord {
    pub fn load(&self) -> Result<GrayImage> {
        load_image(&self.path)
    }
}

/// Class directories of a config: the explicit list, or the sorted
/// subdirectories of `data_root`.
pub fn class_sources(config: &ExperimentConfig) -> Result<Vec<ClassSource>> {
    if !config.classes.is_empty() {
        return Ok(config.classes.clone());
    }
    let root = config
        .data_root
        .as_ref()
        .ok_or_else(|| Error::Config("no data_root and no classes".into()))?;
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!("`{}` has no class directories", root.display())));
    }
    Ok(dirs
        .into_iter()
        .map(|path| ClassSource {
            label: path.file_name().unwrap().to_string_lossy().into_owned(),
            path,
            roi: None,
        })
        .collect())
}

/// ROI settings of one class.
pub fn roi_spec_for<'a>(config: &'a ExperimentConfig, label: &str) -> &'a RoiSpec {
    config
        .classes
        .iter()
        .find(|c| c.label == label)
        .and_then(|c| c.roi.as_ref())
        .unwrap_or(&config.roi)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn list_class(source: &ClassSource, cap: usize) -> Result<Vec<PathBuf>> {
    let dir = &source.path;
    if !dir.is_dir() {
        return Err(Error::Data(format!(
            "class `{}`: directory `{}` does not exist",
            source.label,
            dir.display()
        )));
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    files.truncate(cap);
    Ok(files)
}

/// Lists every class's samples in lexicographic order, capped at
/// `samples_per_class`. Image headers are checked, pixels are not decoded.
pub fn ingest(config: &ExperimentConfig) -> Result<Vec<SampleRecord>> {
    let mut records = Vec::new();
    let mut seen = Vec::new();
    for source in class_sources(config)? {
        if seen.contains(&source.label) {
            return Err(Error::Config(format!("duplicate class label `{}`", source.label)));
        }
        seen.push(source.label.clone());
        let files = list_class(&source, config.samples_per_class)?;
        if files.is_empty() {
            return Err(Error::Data(format!("class `{}` has no images", source.label)));
        }
        if files.len() < config.min_samples_per_class.max(2) {
            return Err(Error::Data(format!(
                "class `{}` has {} images, need at least {}",
                source.label,
                files.len(),
                config.min_samples_per_class.max(2)
            )));
        }
        for path in &files {
            image::ImageReader::open(path)
                .map_err(|e| Error::io(path, e))?
                .with_guessed_format()
                .map_err(|e| Error::io(path, e))?
                .into_dimensions()
                .map_err(|e| Error::Decode {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
        }
        records.extend(files.into_iter().map(|path| SampleRecord {
            path,
            dataset_label: source.label.clone(),
            variant: Variant::ALL[0],
        }));
    }
    Ok(records)
}

/// Seeded shuffle of all records, then the first `round(fraction * n_c)` of
/// each class in shuffled order go to train. Both sides keep shuffled order.
pub fn split(
    records: &[SampleRecord],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(&r.dataset_label).or_default() += 1;
    }
    if let Some((label, n)) = counts.iter().find(|(_, &n)| n < 2) {
        return Err(Error::Data(format!("class `{label}` has {n} sample, need at least 2")));
    }
    let quota: BTreeMap<&str, usize> = counts
        .iter()
        .map(|(&label, &n)| (label, ((fraction * n as f64).round() as usize).clamp(1, n - 1)))
        .collect();
    let mut order: Vec<&SampleRecord> = records.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken: BTreeMap<&str, usize> = BTreeMap::new();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in order {
        let t = taken.entry(&r.dataset_label).or_default();
        if *t < quota[r.dataset_label.as_str()] {
            *t += 1;
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok((train, test))
}

/// Five-number summary; quartiles interpolate linearly between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl BoxSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(BoxSummary {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub dataset_label: String,
    pub per_image: Vec<ImageStats>,
    pub luminance: BoxSummary,
    pub variance: BoxSummary,
}

impl ClassStats {
    pub fn from_stats(dataset_label: impl Into<String>, per_image: Vec<ImageStats>) -> Result<Self> {
        let means: Vec<f64> = per_image.iter().map(|s| s.mean).collect();
        let vars: Vec<f64> = per_image.iter().map(|s| s.variance).collect();
        let label = dataset_label.into();
        let empty = || Error::Data(format!("class `{label}` has no images"));
        Ok(ClassStats {
            luminance: BoxSummary::of(&means).ok_or_else(empty)?,
            variance: BoxSummary::of(&vars).ok_or_else(empty)?,
            dataset_label: label.clone(),
            per_image,
        })
    }
}

/// Per-class luminance and variance distributions, classes sorted by label.
pub fn dataset_stats(records: &[SampleRecord]) -> Result<Vec<ClassStats>> {
    if records.is_empty() {
        return Err(Error::Data("no records".into()));
    }
    let stats: Vec<ImageStats> = records
        .par_iter()
        .map(|r| r.load().map(|img| image_stats(&img)))
        .collect::<Result<_>>()?;
    let mut by_class: BTreeMap<&str, Vec<ImageStats>> = BTreeMap::new();
    for (r, s) in records.iter().zip(stats) {
        by_class.entry(&r.dataset_label).or_default().push(s);
    }
    by_class
        .into_iter()
        .map(|(label, s)| ClassStats::from_stats(label, s))
        .collect()
}

/// Box-plot rows `label,quantity,min,q1,median,q3,max`.
pub fn stats_csv(stats: &[ClassStats]) -> String {
    let mut out = String::from("dataset_label,quantity,min,q1,median,q3,max\n");
    for s in stats {
        for (name, b) in [("luminance", &s.luminance), ("variance", &s.variance)] {
            out.push_str(&format!(
                "{},{name},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.dataset_label, b.min, b.q1, b.median, b.q3, b.max
            ));
        }
    }
    out
}
