//! Sequential minimal optimization of the soft-margin dual. The first index
//! is the maximal violator; its partner maximizes the second-order gain.

const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct SmoOutcome {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Iteration budget for `n` training points.
pub(crate) fn default_max_iter(n: usize) -> usize {
    (10 * n).max(1000)
}

/// Solves `max sum(a) - 1/2 a'Qa` s.t. `0 <= a <= c`, `y'a = 0`, with
/// `Q_ij = y_i y_j K_ij`. `k` is the row-major `n x n` kernel matrix.
pub(crate) fn solve(k: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoOutcome {
    let n = y.len();
    debug_assert_eq!(k.len(), n * n);
    let mut alpha = vec![0.0; n];
    // v[t] = -y[t] * grad[t], the quantity the working-set rules compare.
    let mut v: Vec<f64> = y.to_vec();
    let diag: Vec<f64> = (0..n).map(|t| k[t * n + t]).collect();
    let is_up = |t: usize, a: f64| if y[t] > 0.0 { a < c } else { a > 0.0 };
    let is_low = |t: usize, a: f64| if y[t] > 0.0 { a > 0.0 } else { a < c };
    let mut up: Vec<bool> = (0..n).map(|t| is_up(t, 0.0)).collect();
    let mut low: Vec<bool> = (0..n).map(|t| is_low(t, 0.0)).collect();
    let mut iterations = 0;
    let mut converged = false;
    let (mut gmax, mut i) = (f64::NEG_INFINITY, usize::MAX);
    for t in 0..n {
        if up[t] && v[t] > gmax {
            gmax = v[t];
            i = t;
        }
    }
    loop {
        // Partner: the violator with the largest second-order gain
        // (gmax - v)^2 / curvature.
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        if i != usize::MAX {
            let kii = diag[i];
            let ki = &k[i * n..(i + 1) * n];
            let mut best = f64::NEG_INFINITY;
            for t in 0..n {
                if !low[t] {
                    continue;
                }
                let vt = v[t];
                gmin = gmin.min(vt);
                let b = gmax - vt;
                if b > 0.0 {
                    let a = (kii + diag[t] - 2.0 * ki[t]).max(TAU);
                    let gain = b * b / a;
                    if gain > best {
                        best = gain;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        let grad_i = -y[i] * v[i];
        let grad_j = -y[j] * v[j];

        let (kii, kjj, kij) = (k[i * n + i], k[j * n + j], k[i * n + j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (-grad_i - grad_j) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (grad_i - grad_j) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (y[i] * (alpha[i] - old_i), y[j] * (alpha[j] - old_j));
        for t in [i, j] {
            up[t] = is_up(t, alpha[t]);
            low[t] = is_low(t, alpha[t]);
        }
        let (ki, kj) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
        gmax = f64::NEG_INFINITY;
        i = usize::MAX;
        for t in 0..n {
            v[t] -= di * ki[t] + dj * kj[t];
            if up[t] && v[t] > gmax {
                gmax = v[t];
                i = t;
            }
        }
    }
    let grad: Vec<f64> = (0..n).map(|t| -y[t] * v[t]).collect();
    if !converged {
        log::debug!("SMO hit the {max_iter}-iteration budget on {n} points");
    }
    SmoOutcome {
        bias: -rho(&alpha, &grad, y, c),
        alpha,
        iterations,
        converged,
    }
}

/// Offset from the free support vectors, or the midpoint of the feasible
/// interval when every multiplier sits at a bound.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
/// Dual objective `sum(a) - 1/2 a'Qa`.
pub(crate) fn dual_objective(k: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}
