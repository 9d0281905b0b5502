use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptors::DescriptorId;
use crate::error::{Error, Result};
use crate::metrics::{confusion, micro_average_curves, micro_fpr, micro_precision, micro_recall, ConfusionCounts, MicroAverage};
use crate::svm::{default_grid, grid_search, train_ovr, GridCell, GridResult, OvrSvmModel};

use super::config::{ExperimentConfig, Variant};
use super::dataset::{ingest, split, SampleRecord};
use super::features::FeatureStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// Test-set outcome of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub accuracy: f64,
    pub micro_precision: Option<f64>,
    pub micro_recall: Option<f64>,
    pub micro_fpr: Option<f64>,
    pub confusion: ConfusionCounts,
    #[serde(skip)]
    pub curves: Option<MicroAverage>,
}

/// One row of the result matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub descriptor: DescriptorId,
    pub variant: Variant,
    pub status: CellStatus,
    pub error: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen: Option<GridCell>,
    pub cv_accuracy: Option<f64>,
    /// Every binary machine of the final model converged.
    pub converged: Option<bool>,
    pub evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub seed: u64,
    pub config_hash: String,
    pub classes: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub cells: Vec<CellReport>,
}

impl MatrixReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }

    pub fn cell(&self, descriptor: DescriptorId, variant: Variant) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.descriptor == descriptor && c.variant == variant)
    }
}

/// A trained model with the cell it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedCell {
    pub descriptor: DescriptorId,
    pub variant: Variant,
    pub seed: u64,
    pub config_hash: String,
    pub search: GridResult,
    pub model: OvrSvmModel,
}

impl TrainedCell {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cell: TrainedCell = serde_json::from_str(&text).map_err(|e| Error::Config(format!("`{}`: {e}", path.display())))?;
        // Re-checks the embedded model's format version.
        OvrSvmModel::from_json(&cell.model.to_json()?)?;
        Ok(cell)
    }
}

fn labels(records: &[SampleRecord]) -> Vec<String> {
    records.iter().map(|r| r.dataset_label.clone()).collect()
}

/// A config with its ingested records, split into train (first `n_train`) and test.
pub struct Experiment<'a> {
    pub config: &'a ExperimentConfig,
    records: Vec<SampleRecord>,
    n_train: usize,
}

impl<'a> Experiment<'a> {
    pub fn prepare(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let all = ingest(config)?;
        let (train, test) = split(&all, config.split_fraction, config.seed)?;
        let n_train = train.len();
        let mut records = train;
        records.extend(test);
        Ok(Experiment { config, records, n_train })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn train_records(&self) -> &[SampleRecord] {
        &self.records[..self.n_train]
    }

    pub fn test_records(&self) -> &[SampleRecord] {
        &self.records[self.n_train..]
    }

    pub fn feature_store(&self) -> FeatureStore<'_> {
        FeatureStore::new(self.config, &self.records)
    }

    /// Grid search on the training split, then a fit on all of it.
    pub fn train(&self, features: &[Vec<f64>]) -> Result<(OvrSvmModel, GridResult)> {
        let x = &features[..self.n_train];
        let y = labels(self.train_records());
        let grid = match &self.config.grid {
            Some(g) => g.clone(),
            None => default_grid(x[0].len()),
        };
        let search = grid_search(x, &y, &grid, self.config.folds, self.config.seed, &self.config.train)?;
        let model = train_ovr(x, &y, search.best.c, search.best.kernel, &self.config.train)?;
        Ok((model, search))
    }

    /// Scores the test split.
    pub fn evaluate(&self, model: &OvrSvmModel, features: &[Vec<f64>]) -> Result<Evaluation> {
        let x = &features[self.n_train..];
        let truth: Vec<usize> = self
            .test_records()
            .iter()
            .map(|r| {
                model.classes.binary_search(&r.dataset_label).map_err(|_| {
                    Error::Data(format!("test class `{}` unknown to the model", r.dataset_label))
                })
            })
            .collect::<Result<_>>()?;
        let scores: Vec<Vec<f64>> = x.iter().map(|row| model.scores(row)).collect::<Result<_>>()?;
        let pred: Vec<usize> = scores.iter().map(|s| crate::svm::argmax(s)).collect();
        let counts = confusion(&truth, &pred, model.classes.len())?;
        let curves = micro_average_curves(&scores, &truth)?;
        let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();
        Ok(Evaluation {
            auc_roc: curves.auc_roc,
            auc_pr: curves.auc_pr,
            accuracy: correct as f64 / truth.len() as f64,
            micro_precision: micro_precision(&counts),
            micro_recall: micro_recall(&counts),
            micro_fpr: micro_fpr(&counts),
            confusion: counts,
            curves: Some(curves),
        })
    }

    pub fn train_cell(&self, store: &mut FeatureStore<'_>, descriptor: DescriptorId, variant: Variant) -> Result<TrainedCell> {
        let f = store.features(variant, descriptor)?;
        let (model, search) = self.train(&f)?;
        Ok(TrainedCell {
            descriptor,
            variant,
            seed: self.config.seed,
            config_hash: self.config.hash(),
            search,
            model,
        })
    }

    /// Test-split evaluation of a saved cell, reported as a matrix row.
    pub fn evaluate_cell(&self, store: &mut FeatureStore<'_>, trained: &TrainedCell) -> CellReport {
        let mut cell = self.blank(trained.descriptor, trained.variant);
        cell.chosen = Some(trained.search.best);
        cell.cv_accuracy = Some(trained.search.best_accuracy);
        cell.converged = Some(trained.model.all_converged());
        match store
            .features(trained.variant, trained.descriptor)
            .and_then(|f| self.evaluate(&trained.model, &f))
        {
            Ok(e) => {
                cell.status = CellStatus::Ok;
                cell.evaluation = Some(e);
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    }

    fn blank(&self, descriptor: DescriptorId, variant: Variant) -> CellReport {
        CellReport {
            descriptor,
            variant,
            status: CellStatus::Failed,
            error: None,
            seed: self.config.seed,
            config_hash: self.config.hash(),
            n_train: self.n_train,
            n_test: self.records.len() - self.n_train,
            chosen: None,
            cv_accuracy: None,
            converged: None,
            evaluation: None,
        }
    }

    /// Trains and evaluates one cell; failures are recorded, not returned.
    pub fn run_cell(&self, store: &mut FeatureStore<'_>, descriptor: DescriptorId, variant: Variant) -> CellReport {
        let mut cell = self.blank(descriptor, variant);
        let outcome = store.features(variant, descriptor).and_then(|f| {
            let (model, search) = self.train(&f)?;
            cell.chosen = Some(search.best);
            cell.cv_accuracy = Some(search.best_accuracy);
            cell.converged = Some(model.all_converged());
            self.evaluate(&model, &f)
        });
        match outcome {
            Ok(eval) => {
                cell.status = CellStatus::Ok;
                cell.evaluation = Some(eval);
            }
            Err(e) => {
                log::warn!("cell {descriptor}/{variant} failed: {e}");
                cell.error = Some(e.to_string());
            }
        }
        cell
    }

    pub fn classes(&self) -> Vec<String> {
        let mut c = labels(&self.records);
        c.sort();
        c.dedup();
        c
    }
}

/// Every configured (variant, descriptor) cell. Only ingestion and split
/// errors abort the run; cell failures are recorded in their rows.
pub fn run_matrix(config: &ExperimentConfig) -> Result<MatrixReport> {
    let exp = Experiment::prepare(config)?;
    let mut store = exp.feature_store();
    let mut cells = Vec::new();
    for &variant in &config.variants {
        for &descriptor in &config.descriptors {
            log::info!("cell {descriptor}/{variant}");
            cells.push(exp.run_cell(&mut store, descriptor, variant));
        }
    }
    Ok(MatrixReport {
        seed: config.seed,
        config_hash: config.hash(),
        classes: exp.classes(),
        n_train: exp.n_train,
        n_test: exp.records.len() - exp.n_train,
        cells,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per cell.
pub fn table_csv(report: &MatrixReport) -> String {
    let mut out = String::from(
        "descriptor,variant,status,auc_roc,auc_pr,accuracy,micro_precision,micro_recall,micro_fpr,cv_accuracy,c,kernel,converged,n_train,n_test,seed,config_hash,error\n",
    );
    for c in &report.cells {
        let e = c.evaluation.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.descriptor,
            c.variant,
            if c.status == CellStatus::Ok { "ok" } else { "failed" },
            fmt_opt(e.map(|e| e.auc_roc)),
            fmt_opt(e.map(|e| e.auc_pr)),
            fmt_opt(e.map(|e| e.accuracy)),
            fmt_opt(e.and_then(|e| e.micro_precision)),
            fmt_opt(e.and_then(|e| e.micro_recall)),
            fmt_opt(e.and_then(|e| e.micro_fpr)),
            fmt_opt(c.cv_accuracy),
            c.chosen.map_or_else(String::new, |g| g.c.to_string()),
            csv_field(&c.chosen.map_or_else(String::new, |g| g.kernel.label())),
            c.converged.map_or_else(String::new, |b| b.to_string()),
            c.n_train,
            c.n_test,
            c.seed,
            c.config_hash,
            csv_field(c.error.as_deref().unwrap_or("")),
        );
    }
    out
}

/// Descriptors as rows, two AUC columns per variant.
pub fn pivot_csv(report: &MatrixReport) -> String {
    let mut variants: Vec<Variant> = Vec::new();
    let mut descriptors: Vec<DescriptorId> = Vec::new();
    for c in &report.cells {
        if !variants.contains(&c.variant) {
            variants.push(c.variant);
        }
        if !descriptors.contains(&c.descriptor) {
            descriptors.push(c.descriptor);
        }
    }
    let mut out = String::from("descriptor");
    for v in &variants {
        let _ = write!(out, ",{v}:auc_roc,{v}:auc_pr");
    }
    out.push('\n');
    for d in descriptors {
        out.push_str(d.name());
        for &v in &variants {
            let e = report.cell(d, v).and_then(|c| c.evaluation.as_ref());
            let _ = write!(out, ",{},{}", fmt_opt(e.map(|e| e.auc_roc)), fmt_opt(e.map(|e| e.auc_pr)));
        }
        out.push('\n');
    }
    out
}

/// Writes `report.json`, `table.csv`, `table1.csv` and, when enabled,
/// `curves/<descriptor>_<variant>_{roc,pr}.csv` under `dir`.
pub fn write_report(report: &MatrixReport, dir: &Path, curves: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write("report.json", serde_json::to_string_pretty(report)?.as_bytes())?;
    write("table.csv", table_csv(report).as_bytes())?;
    write("table1.csv", pivot_csv(report).as_bytes())?;
    if curves {
        let cdir = dir.join("curves");
        std::fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
        for c in &report.cells {
            let Some(m) = c.evaluation.as_ref().and_then(|e| e.curves.as_ref()) else { continue };
            for (kind, curve) in [("roc", &m.roc), ("pr", &m.pr)] {
                let p = cdir.join(format!("{}_{}_{kind}.csv", c.descriptor, c.variant));
                let mut buf = Vec::new();
                curve.write_csv(&mut buf).map_err(|e| Error::io(&p, e))?;
                std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    Ok(())
}
