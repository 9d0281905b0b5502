use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kernel::{submatrix, Gram};
use super::ovr::{argmax, check_multiclass, encode_labels, Standardizer};
use super::{fit_with_kernel, KernelSpec, TrainParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    pub kernel: KernelSpec,
}

/// C in {0.1, 1, 10, 100} crossed with linear, rbf and polynomial kernels,
/// gamma in {1/dim, 0.01, 0.1, 1}, degree in {2, 3}, coef0 = 1.
pub fn default_grid(dim: usize) -> Vec<GridCell> {
    let mut gammas = vec![1.0 / dim.max(1) as f64, 0.01, 0.1, 1.0];
    let mut seen = Vec::new();
    gammas.retain(|g| {
        let fresh = !seen.contains(g);
        seen.push(*g);
        fresh
    });
    let mut kernels = vec![KernelSpec::Linear];
    kernels.extend(gammas.iter().map(|&gamma| KernelSpec::Rbf { gamma }));
    for degree in [2, 3] {
        kernels.extend(gammas.iter().map(|&gamma| KernelSpec::Poly {
            gamma,
            degree,
            coef0: 1.0,
        }));
    }
    [0.1, 1.0, 10.0, 100.0]
        .into_iter()
        .flat_map(|c| kernels.iter().map(move |&kernel| GridCell { c, kernel }))
        .collect()
}

/// Fold of every sample: each class is shuffled with `seed`, classes are
/// concatenated in index order and folds are dealt round-robin.
pub fn stratified_folds(class_idx: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let classes = class_idx.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(class_idx.len());
    for k in 0..classes {
        let mut members: Vec<usize> = (0..class_idx.len()).filter(|&i| class_idx[i] == k).collect();
        if !members.is_empty() && members.len() < folds {
            return Err(Error::Training(format!(
                "class {k} has {} samples, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut fold = vec![0; class_idx.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub cell: GridCell,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub fold_accuracy: Vec<f64>,
    /// Every binary machine of every fold converged.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridCell,
    pub best_accuracy: f64,
    pub table: Vec<CvRow>,
}

struct FoldData {
    train: Vec<usize>,
    valid: Vec<usize>,
    z: Vec<Vec<f64>>,
    gram: Gram,
}

/// Accuracy of one grid cell on one fold: `(correct, total, converged)`.
fn score_cell(fold: &FoldData, idx: &[usize], classes: usize, cell: &GridCell, params: &TrainParams) -> (usize, usize, bool) {
    let n = fold.z.len();
    let kmat = fold.gram.kernel(&cell.kernel);
    let ktrain = submatrix(&kmat, n, &fold.train);
    let ztrain: Vec<Vec<f64>> = fold.train.iter().map(|&i| fold.z[i].clone()).collect();
    let mut scores = vec![vec![0.0; classes]; fold.valid.len()];
    let mut converged = true;
    for k in 0..classes {
        let y: Vec<f64> = fold.train.iter().map(|&i| if idx[i] == k { 1.0 } else { -1.0 }).collect();
        let m = fit_with_kernel(&ztrain, &y, &ktrain, cell.c, cell.kernel, params);
        converged &= m.converged;
        for (row, &v) in scores.iter_mut().zip(&fold.valid) {
            let mut s = m.bias;
            for (&t, &a) in m.support_indices.iter().zip(&m.coef) {
                s += a * kmat[v * n + fold.train[t]];
            }
            row[k] = s;
        }
    }
    let correct = scores
        .iter()
        .zip(&fold.valid)
        .filter(|(s, &v)| argmax(s) == idx[v])
        .count();
    (correct, fold.valid.len(), converged)
}

/// Stratified k-fold search; the best cell maximizes mean validation
/// accuracy, ties going to smaller C, then the simpler kernel, then grid order.
pub fn grid_search(
    x: &[Vec<f64>],
    labels: &[String],
    grid: &[GridCell],
    folds: usize,
    seed: u64,
    params: &TrainParams,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    for cell in grid {
        cell.kernel.validate()?;
        if !(cell.c > 0.0 && cell.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", cell.c)));
        }
    }
    check_multiclass(x, labels, folds)?;
    let (classes, idx) = encode_labels(labels);
    let assignment = stratified_folds(&idx, folds, seed)?;

    let fold_data: Vec<FoldData> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] != f).collect();
            let valid: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] == f).collect();
            let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let standardizer = if params.standardize {
                Standardizer::fit(&train_rows)?
            } else {
                Standardizer::identity(x[0].len())
            };
            let z = standardizer.apply_all(x)?;
            let gram = Gram::new(&z);
            Ok(FoldData { train, valid, z, gram })
        })
        .collect::<Result<_>>()?;

    let table: Vec<CvRow> = grid
        .par_iter()
        .map(|cell| {
            let mut row = CvRow {
                cell: *cell,
                correct: 0,
                total: 0,
                accuracy: 0.0,
                fold_accuracy: Vec::with_capacity(folds),
                converged: true,
            };
            for fold in &fold_data {
                let (correct, total, converged) = score_cell(fold, &idx, classes.len(), cell, params);
                row.correct += correct;
                row.total += total;
                row.fold_accuracy.push(correct as f64 / total as f64);
                row.converged &= converged;
            }
            row.accuracy = row.correct as f64 / row.total as f64;
            row
        })
        .collect();

    let best = table
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            b.correct
                .cmp(&a.correct)
                .then(a.cell.c.total_cmp(&b.cell.c))
                .then(a.cell.kernel.complexity().cmp(&b.cell.kernel.complexity()))
                .then(ia.cmp(ib))
        })
        .map(|(_, r)| r)
        .expect("grid is nonempty");
    Ok(GridResult {
        best: best.cell,
        best_accuracy: best.accuracy,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_data::blobs;
    use super::*;

    fn labels(idx: &[usize]) -> Vec<String> {
        idx.iter().map(|i| format!("class{i}")).collect()
    }

    #[test]
    fn default_grid_has_52_cells() {
        let g = default_grid(30);
        assert_eq!(g.len(), 52);
        assert_eq!(g.iter().filter(|c| c.kernel == KernelSpec::Linear).count(), 4);
        // 1/dim coinciding with a listed gamma is not searched twice.
        assert_eq!(default_grid(10).len(), 4 * (1 + 3 + 6));
    }

    #[test]
    fn folds_are_stratified_and_even() {
        let idx: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let f = stratified_folds(&idx, 4, 1).unwrap();
        for k in 0..4 {
            assert_eq!(f.iter().filter(|&&v| v == k).count(), 25);
        }
        for c in 0..4 {
            let per: Vec<usize> = (0..4)
                .map(|k| (0..100).filter(|&i| idx[i] == c && f[i] == k).count())
                .collect();
            assert!(per.iter().all(|&n| n == 6 || n == 7), "{per:?}");
        }
        assert_eq!(f, stratified_folds(&idx, 4, 1).unwrap());
        assert_ne!(f, stratified_folds(&idx, 4, 2).unwrap());
        assert!(stratified_folds(&idx, 1, 0).is_err());
        assert!(stratified_folds(&[0, 0, 1], 2, 0).is_err());
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let (x, y) = blobs(&[[0.0, 0.0], [3.0, 3.0]], 12, 0.8, 1);
        let cell = GridCell { c: 10.0, kernel: KernelSpec::Rbf { gamma: 0.1 } };
        let r = grid_search(&x, &labels(&y), &[cell], 4, 0, &TrainParams::default()).unwrap();
        assert_eq!(r.best, cell);
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].total, 24);
        assert!(grid_search(&x, &labels(&y), &[], 4, 0, &TrainParams::default()).is_err());
    }

    #[test]
    fn linear_wins_or_ties_on_separable_blobs() {
        let (x, y) = blobs(&[[0.0, 0.0], [6.0, 0.0], [3.0, 6.0]], 16, 0.8, 2);
        let r = grid_search(&x, &labels(&y), &default_grid(2), 4, 7, &TrainParams::default()).unwrap();
        let linear_best = r
            .table
            .iter()
            .filter(|row| row.cell.kernel == KernelSpec::Linear)
            .map(|row| row.correct)
            .max()
            .unwrap();
        let rbf_best = r
            .table
            .iter()
            .filter(|row| matches!(row.cell.kernel, KernelSpec::Rbf { .. }))
            .map(|row| row.correct)
            .max()
            .unwrap();
        assert!(linear_best >= rbf_best);
        assert_eq!(r.best_accuracy, 1.0);
        // Ties go to the smallest C and then to the linear kernel.
        assert_eq!(r.best, GridCell { c: 0.1, kernel: KernelSpec::Linear });
    }

    #[test]
    fn search_is_deterministic() {
        let (x, y) = blobs(&[[0.0, 0.0], [1.0, 1.0]], 10, 1.0, 5);
        let grid = default_grid(2);
        let a = grid_search(&x, &labels(&y), &grid, 4, 3, &TrainParams::default()).unwrap();
        let b = grid_search(&x, &labels(&y), &grid, 4, 3, &TrainParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
