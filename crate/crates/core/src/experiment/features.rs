use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::descriptors::{extract, frf_with, DescriptorId, FrfOptions};
use crate::enhance::enhance_pipeline;
use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::roi::{extract_roi_aligned, extract_roi_common, RoiMethod};

use super::config::{ExperimentConfig, Region, Variant};
use super::dataset::{roi_spec_for, SampleRecord};

/// Rounds to 9 significant digits, the precision kept in the cache file, so
/// cached and freshly computed features are the same numbers.
pub fn quantize_feature(v: f64) -> f64 {
    format_feature(v).parse().expect("formatted float parses")
}

fn format_feature(v: f64) -> String {
    format!("{v:.8e}")
}

/// Loads every record and applies the variant: ROI cropping, then enhancement.
pub fn preprocess(config: &ExperimentConfig, records: &[SampleRecord], variant: Variant) -> Result<Vec<GrayImage>> {
    let images: Vec<GrayImage> = records.par_iter().map(SampleRecord::load).collect::<Result<_>>()?;
    let images = match variant.region {
        Region::Original => images,
        Region::Roi => crop_rois(config, records, images)?,
    };
    if !variant.enhanced {
        return Ok(images);
    }
    images
        .par_iter()
        .map(|img| enhance_pipeline(img, &config.enhance))
        .collect()
}

fn crop_rois(config: &ExperimentConfig, records: &[SampleRecord], images: Vec<GrayImage>) -> Result<Vec<GrayImage>> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_class.entry(&r.dataset_label).or_default().push(i);
    }
    let mut out: Vec<Option<GrayImage>> = vec![None; images.len()];
    for (label, idx) in by_class {
        let spec = roi_spec_for(config, label);
        if spec.method == RoiMethod::CommonPatch {
            let stack: Vec<GrayImage> = idx.iter().map(|&i| images[i].clone()).collect();
            let common = extract_roi_common(&stack, spec)
                .map_err(|e| Error::Data(format!("class `{label}`: common ROI failed: {e}")))?;
            for (&i, img) in idx.iter().zip(common.images) {
                out[i] = Some(img);
            }
        } else {
            let crops: Vec<GrayImage> = idx
                .par_iter()
                .map(|&i| {
                    extract_roi_aligned(&images[i], spec)
                        .map(|roi| roi.image)
                        .map_err(|e| Error::Data(format!("`{}`: ROI failed: {e}", records[i].path.display())))
                })
                .collect::<Result<_>>()?;
            for (&i, img) in idx.iter().zip(crops) {
                out[i] = Some(img);
            }
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every record belongs to a class")).collect())
}

/// Quantized descriptor values of every image.
pub fn compute_features(config: &ExperimentConfig, images: &[GrayImage], records: &[SampleRecord], descriptor: DescriptorId) -> Result<Vec<Vec<f64>>> {
    images
        .par_iter()
        .zip(records)
        .map(|(img, r)| {
            let fv = match descriptor {
                DescriptorId::Frf => frf_with(img, FrfOptions { log_magnitude: config.frf_log_magnitude }),
                d => extract(img, d),
            }
            .map_err(|e| Error::Data(format!("`{}`: {descriptor} failed: {e}", r.path.display())))?;
            Ok(fv.values.into_iter().map(quantize_feature).collect())
        })
        .collect()
}

/// Digest of the record files' paths, sizes and modification times, so a
/// regenerated dataset does not hit a stale cache.
pub fn records_digest(records: &[SampleRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.path.to_string_lossy().as_bytes());
        h.update(r.dataset_label.as_bytes());
        if let Ok(meta) = std::fs::metadata(&r.path) {
            h.update(meta.len().to_le_bytes());
            if let Ok(t) = meta.modified().map(|t| t.duration_since(std::time::UNIX_EPOCH).unwrap_or_default()) {
                h.update(t.as_nanos().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())[..12].to_string()
}

pub fn cache_path(config: &ExperimentConfig, records: &[SampleRecord], variant: Variant, descriptor: DescriptorId) -> PathBuf {
    cache_file(config, &records_digest(records), variant, descriptor)
}

fn cache_file(config: &ExperimentConfig, digest: &str, variant: Variant, descriptor: DescriptorId) -> PathBuf {
    let name = format!("{}_{descriptor}_{}_{digest}.csv", variant.tag(), config.preprocessing_key(variant));
    config.output_dir.join("features").join(name)
}

/// Writes the cache file through a temporary file and a rename, so readers
/// see either no file or a complete one.
pub fn write_cache(
    path: &Path,
    records: &[SampleRecord],
    variant: Variant,
    descriptor: DescriptorId,
    values: &[Vec<f64>],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("csv.{}.tmp", std::process::id()));
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(&tmp).map_err(|e| csv_error(&tmp, e))?;
    let dim = values.first().map_or(0, Vec::len);
    let mut header = vec!["sample_path".to_string(), "dataset_label".into(), "descriptor_id".into(), "tag".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(|e| csv_error(&tmp, e))?;
    for (r, row) in records.iter().zip(values) {
        let mut fields = vec![
            r.path.to_string_lossy().into_owned(),
            r.dataset_label.clone(),
            descriptor.to_string(),
            variant.tag(),
        ];
        fields.extend(row.iter().map(|&v| format_feature(v)));
        w.write_record(&fields).map_err(|e| csv_error(&tmp, e))?;
    }
    w.flush().map_err(|e| Error::io(&tmp, e))?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("`{}`: {e}", path.display()))
}

/// Cached values, or `None` when the file is absent or was built from other records.
pub fn read_cache(
    path: &Path,
    records: &[SampleRecord],
    variant: Variant,
    descriptor: DescriptorId,
) -> Result<Option<Vec<Vec<f64>>>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| csv_error(path, e))?;
    let mut by_path: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for row in rd.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        if row.len() != 4 + descriptor.dim() || &row[2] != descriptor.to_string() || &row[3] != variant.tag() {
            return Ok(None);
        }
        let values: std::result::Result<Vec<f64>, _> = row.iter().skip(4).map(str::parse).collect();
        let Ok(values) = values else { return Ok(None) };
        by_path.insert((row[0].to_string(), row[1].to_string()), values);
    }
    records
        .iter()
        .map(|r| by_path.get(&(r.path.to_string_lossy().into_owned(), r.dataset_label.clone())).cloned())
        .collect::<Option<Vec<_>>>()
        .map_or(Ok(None), |v| Ok(Some(v)))
}

/// Features of a fixed record list per (variant, descriptor), with the
/// preprocessed images of the most recent variant kept in memory.
pub struct FeatureStore<'a> {
    config: &'a ExperimentConfig,
    records: &'a [SampleRecord],
    digest: String,
    images: Option<(Variant, Vec<GrayImage>)>,
}

impl<'a> FeatureStore<'a> {
    pub fn new(config: &'a ExperimentConfig, records: &'a [SampleRecord]) -> Self {
        let digest = records_digest(records);
        FeatureStore { config, records, digest, images: None }
    }

    fn images(&mut self, variant: Variant) -> Result<&[GrayImage]> {
        if self.images.as_ref().is_none_or(|(v, _)| *v != variant) {
            self.images = None;
            let imgs = preprocess(self.config, self.records, variant)?;
            self.images = Some((variant, imgs));
        }
        Ok(&self.images.as_ref().unwrap().1)
    }

    pub fn features(&mut self, variant: Variant, descriptor: DescriptorId) -> Result<Vec<Vec<f64>>> {
        let path = cache_file(self.config, &self.digest, variant, descriptor);
        if self.config.feature_cache {
            if let Some(hit) = read_cache(&path, self.records, variant, descriptor)? {
                log::debug!("feature cache hit {}", path.display());
                return Ok(hit);
            }
        }
        let (config, records) = (self.config, self.records);
        let values = compute_features(config, self.images(variant)?, records, descriptor)?;
        if config.feature_cache {
            write_cache(&path, records, variant, descriptor, &values)?;
        }
        Ok(values)
    }
}

/// A preprocessed sample written to disk.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExportedSample {
    pub source: PathBuf,
    pub output: PathBuf,
    pub dataset_label: String,
    pub width: usize,
    pub height: usize,
    pub provenance: Vec<String>,
}

/// Writes the variant's images as `<out>/<label>/<file stem>.png` plus a
/// `manifest.json` listing every sample's processing chain.
pub fn export_variant(config: &ExperimentConfig, records: &[SampleRecord], variant: Variant, out: &Path) -> Result<Vec<ExportedSample>> {
    let images = preprocess(config, records, variant)?;
    let mut manifest = Vec::with_capacity(images.len());
    for (r, img) in records.iter().zip(&images) {
        let dir = out.join(&r.dataset_label);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = r.path.file_stem().map_or_else(|| "sample".into(), |s| s.to_string_lossy().into_owned());
        let output = dir.join(format!("{stem}.png"));
        crate::imaging::save_png(img, &output)?;
        manifest.push(ExportedSample {
            source: r.path.clone(),
            output,
            dataset_label: r.dataset_label.clone(),
            width: img.width(),
            height: img.height(),
            provenance: img.provenance().to_vec(),
        });
    }
    let p = out.join("manifest.json");
    std::fs::write(&p, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}
