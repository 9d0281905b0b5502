//! Multi-class evaluation: one-vs-rest confusion counts, micro averages,
//! ROC and precision-recall curves with trapezoidal areas.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// One-vs-rest counts for each class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
}

impl ConfusionCounts {
    pub fn class_count(&self) -> usize {
        self.per_class.len()
    }

    /// Pooled `(tp, fp, fn, tn)` over all classes.
    pub fn pooled(&self) -> ClassCounts {
        self.per_class.iter().fold(ClassCounts::default(), |a, c| ClassCounts {
            tp: a.tp + c.tp,
            fp: a.fp + c.fp,
            fn_: a.fn_ + c.fn_,
            tn: a.tn + c.tn,
        })
    }
}

/// Counts true/false positives and negatives per class for single-label
/// predictions over `classes` class indices.
pub fn confusion(truth: &[usize], pred: &[usize], classes: usize) -> Result<ConfusionCounts> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Metric("confusion of an empty label set".into()));
    }
    if let Some(&bad) = truth.iter().chain(pred).find(|&&c| c >= classes) {
        return Err(Error::Metric(format!(
            "class index {bad} outside 0..{classes}"
        )));
    }
    let n = truth.len() as u64;
    let mut per_class = vec![ClassCounts::default(); classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            per_class[t].tp += 1;
        } else {
            per_class[p].fp += 1;
            per_class[t].fn_ += 1;
        }
    }
    for c in &mut per_class {
        c.tn = n - c.tp - c.fp - c.fn_;
    }
    Ok(ConfusionCounts { per_class })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Pooled precision; `None` when nothing was predicted positive.
pub fn micro_precision(cc: &ConfusionCounts) -> Option<f64> {
    let p = cc.pooled();
    ratio(p.tp, p.tp + p.fp)
}

pub fn micro_recall(cc: &ConfusionCounts) -> Option<f64> {
    let p = cc.pooled();
    ratio(p.tp, p.tp + p.fn_)
}

pub fn micro_fpr(cc: &ConfusionCounts) -> Option<f64> {
    let p = cc.pooled();
    ratio(p.fp, p.fp + p.tn)
}

/// Unweighted mean of per-class recalls; `None` if a class has no samples.
pub fn macro_recall(cc: &ConfusionCounts) -> Option<f64> {
    let recalls: Option<Vec<f64>> = cc
        .per_class
        .iter()
        .map(|c| ratio(c.tp, c.tp + c.fn_))
        .collect();
    let recalls = recalls?;
    Some(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// x = false positive rate, y = true positive rate.
    Roc,
    /// x = recall, y = precision.
    PrecisionRecall,
}

/// Operating points for descending thresholds; the first point is the
/// anchor at threshold `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub thresholds: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CurvePoints {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Writes `threshold,x,y` rows with a header.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "threshold,x,y")?;
        for ((t, x), y) in self.thresholds.iter().zip(&self.x).zip(&self.y) {
            writeln!(out, "{t},{x},{y}")?;
        }
        Ok(())
    }
}

/// Cumulative `(threshold, tp, fp)` after each distinct score, highest first.
fn sweep(scores: &[f64], labels: &[bool]) -> Result<(Vec<(f64, u64, u64)>, u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(
            "curves need both positive and negative labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push((t, tp, fp));
    }
    Ok((steps, pos, neg))
}

/// ROC curve over all distinct thresholds; starts at (0,0), ends at (1,1).
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<CurvePoints> {
    let (steps, pos, neg) = sweep(scores, labels)?;
    let mut curve = CurvePoints {
        kind: CurveKind::Roc,
        thresholds: vec![f64::INFINITY],
        x: vec![0.0],
        y: vec![0.0],
    };
    for (t, tp, fp) in steps {
        curve.thresholds.push(t);
        curve.x.push(fp as f64 / neg as f64);
        curve.y.push(tp as f64 / pos as f64);
    }
    Ok(curve)
}

/// Precision-recall curve; the recall-0 anchor takes the precision of the
/// highest threshold.
pub fn pr_points(scores: &[f64], labels: &[bool]) -> Result<CurvePoints> {
    let (steps, pos, _) = sweep(scores, labels)?;
    let first = steps[0];
    let mut curve = CurvePoints {
        kind: CurveKind::PrecisionRecall,
        thresholds: vec![f64::INFINITY],
        x: vec![0.0],
        y: vec![first.1 as f64 / (first.1 + first.2) as f64],
    };
    for (t, tp, fp) in steps {
        curve.thresholds.push(t);
        curve.x.push(tp as f64 / pos as f64);
        curve.y.push(tp as f64 / (tp + fp) as f64);
    }
    Ok(curve)
}

/// Trapezoidal area under the curve over `x`.
pub fn auc(curve: &CurvePoints) -> Result<f64> {
    if curve.x.len() < 2 || curve.x.len() != curve.y.len() {
        return Err(Error::Metric("AUC needs at least two points".into()));
    }
    let mut area = 0.0;
    for i in 1..curve.x.len() {
        let dx = curve.x[i] - curve.x[i - 1];
        if dx < 0.0 {
            return Err(Error::Metric(format!(
                "curve x decreases at point {i}: {} -> {}",
                curve.x[i - 1],
                curve.x[i]
            )));
        }
        area += dx * (curve.y[i] + curve.y[i - 1]) / 2.0;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroAverage {
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub roc: CurvePoints,
    pub pr: CurvePoints,
}

/// Binarizes `truth` one-vs-rest, pools every (score, label) pair of the
/// `samples x classes` score matrix and integrates the pooled curves.
pub fn micro_average_curves(scores: &[Vec<f64>], truth: &[usize]) -> Result<MicroAverage> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    let classes = scores.first().map_or(0, Vec::len);
    let mut pooled_scores = Vec::with_capacity(scores.len() * classes);
    let mut pooled_labels = Vec::with_capacity(scores.len() * classes);
    for (row, &t) in scores.iter().zip(truth) {
        if row.len() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                got: row.len(),
            });
        }
        if t >= classes {
            return Err(Error::Metric(format!(
                "class index {t} outside 0..{classes}"
            )));
        }
        for (c, &s) in row.iter().enumerate() {
            pooled_scores.push(s);
            pooled_labels.push(c == t);
        }
    }
    let roc = roc_points(&pooled_scores, &pooled_labels)?;
    let pr = pr_points(&pooled_scores, &pooled_labels)?;
    Ok(MicroAverage {
        auc_roc: auc(&roc)?,
        auc_pr: auc(&pr)?,
        roc,
        pr,
    })
}
