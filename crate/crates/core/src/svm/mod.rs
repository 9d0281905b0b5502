//! Soft-margin support vector machines: kernels, SMO training, one-vs-rest
//! multiclass models and grid search with stratified cross-validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod grid;
mod kernel;
mod ovr;
mod smo;

pub use grid::{default_grid, grid_search, stratified_folds, CvRow, GridCell, GridResult};
pub use kernel::{kernel_eval, Gram, KernelSpec};
pub use ovr::{train_ovr, OvrSvmModel, Standardizer, MODEL_VERSION};
pub(crate) use ovr::argmax;

pub const DEFAULT_TOL: f64 = 1e-3;

/// Solver settings shared by every training entry point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    /// Maximal KKT gap at convergence.
    pub tol: f64,
    /// Pair updates before giving up; `None` scales with the sample count.
    pub max_iter: Option<usize>,
    /// z-score features on the training set before fitting.
    pub standardize: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            tol: DEFAULT_TOL,
            max_iter: None,
            standardize: true,
        }
    }
}

impl TrainParams {
    pub(crate) fn iterations_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| smo::default_max_iter(n))
    }
}

/// Two-class machine with decision `sum(coef_i K(sv_i, x)) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: KernelSpec,
    pub c: f64,
    pub support: Vec<Vec<f64>>,
    /// Signed multipliers `y_i * alpha_i` of the support vectors.
    pub coef: Vec<f64>,
    /// Training-set positions of the support vectors.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let mut s = self.bias;
        for (sv, &a) in self.support.iter().zip(&self.coef) {
            s += a * kernel_eval(&self.kernel, sv, x)?;
        }
        Ok(s)
    }

    /// Multiplier `alpha_i >= 0` of every training point.
    pub fn dual_alphas(&self, n: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; n];
        for (&i, &a) in self.support_indices.iter().zip(&self.coef) {
            alpha[i] = a.abs();
        }
        alpha
    }
}

fn check_binary(x: &[Vec<f64>], y: &[f64], c: f64, kernel: &KernelSpec) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    kernel.validate()?;
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Training("binary labels must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Training("binary training needs both labels".into()));
    }
    let dim = x.first().map_or(0, Vec::len);
    for row in x {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training("non-finite feature value".into()));
        }
    }
    Ok(())
}

/// Fits a machine from a precomputed `n x n` kernel matrix over `x`.
pub(crate) fn fit_with_kernel(
    x: &[Vec<f64>],
    y: &[f64],
    kmat: &[f64],
    c: f64,
    kernel: KernelSpec,
    params: &TrainParams,
) -> BinarySvm {
    let out = smo::solve(kmat, y, c, params.tol, params.iterations_for(y.len()));
    let mut model = BinarySvm {
        kernel,
        c,
        support: Vec::new(),
        coef: Vec::new(),
        support_indices: Vec::new(),
        bias: out.bias,
        iterations: out.iterations,
        converged: out.converged,
    };
    for (i, &a) in out.alpha.iter().enumerate() {
        if a > 0.0 {
            model.support.push(x[i].clone());
            model.coef.push(y[i] * a);
            model.support_indices.push(i);
        }
    }
    model
}

/// Trains a binary soft-margin SVM on labels in `{-1, +1}`.
pub fn train_binary(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    kernel: KernelSpec,
    params: &TrainParams,
) -> Result<BinarySvm> {
    check_binary(x, y, c, &kernel)?;
    let kmat = Gram::new(x).kernel(&kernel);
    Ok(fit_with_kernel(x, y, &kmat, c, kernel, params))
}

/// Feasibility and optimality diagnostics of a trained machine on its training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest `|alpha|` above `C` (0 when the box holds).
    pub box_excess: f64,
    /// `|sum(y_i alpha_i)|`.
    pub equality_residual: f64,
    /// Largest violation of the complementary slackness conditions on `y f(x)`.
    pub max_violation: f64,
    /// Worst `|y f(x) - 1|` over free support vectors.
    pub free_margin_error: f64,
}

impl KktReport {
    pub fn dual_feasible(&self, eps: f64) -> bool {
        self.box_excess <= eps && self.equality_residual <= eps
    }
}

pub fn kkt_report(model: &BinarySvm, x: &[Vec<f64>], y: &[f64]) -> Result<KktReport> {
    let alpha = model.dual_alphas(x.len());
    let box_excess = model
        .coef
        .iter()
        .map(|a| (a.abs() - model.c).max(0.0))
        .fold(0.0, f64::max);
    let equality_residual = model.coef.iter().sum::<f64>().abs();
    let (mut max_violation, mut free_margin_error) = (0.0f64, 0.0f64);
    for (i, row) in x.iter().enumerate() {
        let m = y[i] * model.decision(row)?;
        let v = if alpha[i] <= 0.0 {
            (1.0 - m).max(0.0)
        } else if alpha[i] >= model.c {
            (m - 1.0).max(0.0)
        } else {
            free_margin_error = free_margin_error.max((m - 1.0).abs());
            (m - 1.0).abs()
        };
        max_violation = max_violation.max(v);
    }
    Ok(KktReport {
        box_excess,
        equality_residual,
        max_violation,
        free_margin_error,
    })
}
