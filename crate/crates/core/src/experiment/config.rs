use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descriptors::DescriptorId;
use crate::enhance::EnhanceParams;
use crate::error::{Error, Result};
use crate::roi::{RoiMethod, RoiParams, RoiSpec};
use crate::svm::{GridCell, TrainParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Original,
    Roi,
}

/// One preprocessing condition: whole sample or ROI, with or without enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variant {
    pub region: Region,
    pub enhanced: bool,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant { region: Region::Original, enhanced: false },
        Variant { region: Region::Original, enhanced: true },
        Variant { region: Region::Roi, enhanced: false },
        Variant { region: Region::Roi, enhanced: true },
    ];

    /// Tag such as `orig-noenh` or `roi-enh`.
    pub fn tag(&self) -> String {
        let region = match self.region {
            Region::Original => "orig",
            Region::Roi => "roi",
        };
        let enh = if self.enhanced { "enh" } else { "noenh" };
        format!("{region}-{enh}")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// A labelled directory of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSource {
    pub label: String,
    pub path: PathBuf,
    /// ROI settings for this class; falls back to [`ExperimentConfig::roi`].
    #[serde(default)]
    pub roi: Option<RoiSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory whose subdirectories are the classes (used when `classes` is empty).
    pub data_root: Option<PathBuf>,
    pub classes: Vec<ClassSource>,
    /// Cap on samples taken from each class after lexicographic ordering.
    pub samples_per_class: usize,
    pub min_samples_per_class: usize,
    pub descriptors: Vec<DescriptorId>,
    pub variants: Vec<Variant>,
    pub split_fraction: f64,
    pub seed: u64,
    /// Hyperparameter grid; the default grid for the feature dimension when absent.
    pub grid: Option<Vec<GridCell>>,
    pub folds: usize,
    pub train: TrainParams,
    pub enhance: EnhanceParams,
    /// ROI settings for classes without their own.
    pub roi: RoiSpec,
    pub frf_log_magnitude: bool,
    pub output_dir: PathBuf,
    pub feature_cache: bool,
    /// Write per-cell ROC and PR curve points.
    pub write_curves: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_root: None,
            classes: Vec::new(),
            samples_per_class: 120,
            min_samples_per_class: 4,
            descriptors: DescriptorId::ALL.to_vec(),
            variants: Variant::ALL.to_vec(),
            split_fraction: 0.67,
            seed: 42,
            grid: None,
            folds: 4,
            train: TrainParams::default(),
            enhance: EnhanceParams::default(),
            roi: RoiSpec {
                dataset_id: "default".into(),
                method: RoiMethod::ActiveContour,
                out_w: 96,
                out_h: 40,
                params: RoiParams::default(),
            },
            frf_log_magnitude: false,
            output_dir: PathBuf::from("out"),
            feature_cache: true,
            write_curves: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        // Relative data and output paths are taken relative to the config file.
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            if let Some(root) = config.data_root.as_mut() {
                rebase(root);
            }
            for class in &mut config.classes {
                rebase(&mut class.path);
            }
            rebase(&mut config.output_dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction must be in (0, 1), got {}", self.split_fraction));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        if self.descriptors.is_empty() || self.variants.is_empty() {
            return bad("descriptor and variant lists must be nonempty".into());
        }
        if self.data_root.is_none() && self.classes.is_empty() {
            return bad("either data_root or classes must be given".into());
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                return bad("grid must not be empty".into());
            }
            for cell in grid {
                cell.kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if !(self.train.tol > 0.0) {
            return bad("train.tol must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the JSON serialization, ignoring settings that only affect
    /// where and how outputs are written.
    pub fn hash(&self) -> String {
        let defaults = ExperimentConfig::default();
        let canonical = ExperimentConfig {
            output_dir: defaults.output_dir,
            feature_cache: defaults.feature_cache,
            write_curves: defaults.write_curves,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Hash of the settings that change feature values for `variant`.
    pub(crate) fn preprocessing_key(&self, variant: Variant) -> String {
        let rois: Vec<&RoiSpec> = self.classes.iter().filter_map(|c| c.roi.as_ref()).collect();
        let key = serde_json::json!({
            "variant": variant.tag(),
            "enhance": variant.enhanced.then_some(&self.enhance),
            "roi": (variant.region == Region::Roi).then(|| (&self.roi, rois)),
            "frf_log_magnitude": self.frf_log_magnitude,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))[..12].to_string()
    }
}
