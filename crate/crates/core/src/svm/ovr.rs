use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kernel::Gram;
use super::{fit_with_kernel, BinarySvm, KernelSpec, TrainParams};

pub const MODEL_VERSION: u32 = 1;

/// Per-feature z-scoring fitted on training data. Constant features are
/// dropped and their indices recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_dim: usize,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let dim = x.first().map_or(0, Vec::len);
        if x.is_empty() {
            return Err(Error::Training("cannot standardize an empty set".into()));
        }
        let n = x.len() as f64;
        let mut s = Standardizer {
            input_dim: dim,
            kept: Vec::new(),
            dropped: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
        };
        for j in 0..dim {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 1e-12 * mean.abs().max(1.0) {
                s.kept.push(j);
                s.mean.push(mean);
                s.std.push(std);
            } else {
                s.dropped.push(j);
            }
        }
        if s.kept.is_empty() {
            return Err(Error::Training("every feature is constant".into()));
        }
        Ok(s)
    }

    /// Pass-through that keeps every feature unchanged.
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            input_dim: dim,
            kept: (0..dim).collect(),
            dropped: Vec::new(),
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: row.len(),
            });
        }
        Ok(self
            .kept
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&j, (m, s))| (row[j] - m) / s)
            .collect())
    }

    pub fn apply_all(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter().map(|r| self.apply(r)).collect()
    }
}

/// One binary machine per class; class `k` is `classes[k]` (sorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrSvmModel {
    pub version: u32,
    pub classes: Vec<String>,
    pub standardizer: Standardizer,
    pub machines: Vec<BinarySvm>,
}

/// Sorted distinct labels and each sample's class index.
pub(crate) fn encode_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is present"))
        .collect();
    (classes, idx)
}

pub(crate) fn check_multiclass(x: &[Vec<f64>], labels: &[String], min_per_class: usize) -> Result<()> {
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: labels.len(),
        });
    }
    let (classes, idx) = encode_labels(labels);
    if classes.len() < 2 {
        return Err(Error::Training("need at least two classes".into()));
    }
    for (k, name) in classes.iter().enumerate() {
        let n = idx.iter().filter(|&&i| i == k).count();
        if n < min_per_class {
            return Err(Error::Training(format!(
                "class `{name}` has {n} samples, need at least {min_per_class}"
            )));
        }
    }
    let dim = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: row.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    Ok(())
}

/// One-vs-rest machines from an already standardized training set.
pub(crate) fn fit_ovr_machines(
    z: &[Vec<f64>],
    idx: &[usize],
    classes: usize,
    gram: &Gram,
    c: f64,
    kernel: KernelSpec,
    params: &TrainParams,
) -> Vec<BinarySvm> {
    let kmat = gram.kernel(&kernel);
    (0..classes)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = idx.iter().map(|&i| if i == k { 1.0 } else { -1.0 }).collect();
            fit_with_kernel(z, &y, &kmat, c, kernel, params)
        })
        .collect()
}

/// Standardizes on the training set, then trains one machine per class.
pub fn train_ovr(
    x: &[Vec<f64>],
    labels: &[String],
    c: f64,
    kernel: KernelSpec,
    params: &TrainParams,
) -> Result<OvrSvmModel> {
    check_multiclass(x, labels, 2)?;
    kernel.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let standardizer = if params.standardize {
        Standardizer::fit(x)?
    } else {
        Standardizer::identity(x[0].len())
    };
    let z = standardizer.apply_all(x)?;
    let (classes, idx) = encode_labels(labels);
    let gram = Gram::new(&z);
    let machines = fit_ovr_machines(&z, &idx, classes.len(), &gram, c, kernel, params);
    Ok(OvrSvmModel {
        version: MODEL_VERSION,
        classes,
        standardizer,
        machines,
    })
}

impl OvrSvmModel {
    /// Per-class decision scores, in class order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.standardizer.apply(x)?;
        self.machines.iter().map(|m| m.decision(&z)).collect()
    }

    /// Index of the highest score; the lowest index wins ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<&str> {
        Ok(&self.classes[self.predict(x)?])
    }

    pub fn all_converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_VERSION as u64 => Ok(serde_json::from_value(value)?),
            Some(v) => Err(Error::Config(format!(
                "model version {v} is not supported (expected {MODEL_VERSION})"
            ))),
            None => Err(Error::Config("model file has no version field".into())),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}
