use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, degree: u32, coef0: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            KernelSpec::Poly { gamma, degree, coef0 }
                if gamma > 0.0 && gamma.is_finite() && degree >= 1 && coef0.is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::InvalidArgument(format!("invalid kernel {other:?}"))),
        }
    }

    /// Ordering used to break grid-search ties: linear < rbf < poly.
    pub fn complexity(&self) -> u8 {
        match self {
            KernelSpec::Linear => 0,
            KernelSpec::Rbf { .. } => 1,
            KernelSpec::Poly { .. } => 2,
        }
    }

    /// Kernel value from the inner product and the two squared norms.
    #[inline]
    pub(crate) fn from_dot(&self, dot: f64, xx: f64, zz: f64) -> f64 {
        match *self {
            KernelSpec::Linear => dot,
            KernelSpec::Rbf { gamma } => (-gamma * (xx + zz - 2.0 * dot).max(0.0)).exp(),
            KernelSpec::Poly { gamma, degree, coef0 } => (gamma * dot + coef0).powi(degree as i32),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            KernelSpec::Linear => "linear".into(),
            KernelSpec::Rbf { gamma } => format!("rbf(gamma={gamma})"),
            KernelSpec::Poly { gamma, degree, coef0 } => {
                format!("poly(gamma={gamma},degree={degree},coef0={coef0})")
            }
        }
    }
}

pub(crate) fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// Evaluates `k(x, z)`.
pub fn kernel_eval(k: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    Ok(match *k {
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
        _ => k.from_dot(dot(x, z), 0.0, 0.0),
    })
}

/// Pairwise inner products of a sample set.
#[derive(Debug, Clone)]
pub struct Gram {
    n: usize,
    dots: Vec<f64>,
}

impl Gram {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut dots = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(&rows[i], &rows[j]);
                dots[i * n + j] = v;
                dots[j * n + i] = v;
            }
        }
        Gram { n, dots }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.dots[i * self.n + j]
    }

    /// Kernel matrix over all samples, row-major `n x n`.
    pub fn kernel(&self, k: &KernelSpec) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let xx = self.dot(i, i);
            for j in 0..n {
                out[i * n + j] = k.from_dot(self.dot(i, j), xx, self.dot(j, j));
            }
        }
        out
    }
}

/// Square sub-matrix of a row-major `n x n` matrix.
pub(crate) fn submatrix(full: &[f64], n: usize, idx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * idx.len());
    for &i in idx {
        for &j in idx {
            out.push(full[i * n + j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_arithmetic() {
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let poly = KernelSpec::Poly { gamma: 1.0, degree: 2, coef0: 0.0 };
        assert_eq!(kernel_eval(&poly, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 4.0);
        let rbf = KernelSpec::Rbf { gamma: 0.7 };
        for x in [[0.0, 0.0], [3.5, -2.0], [1e3, 1e-3]] {
            assert_eq!(kernel_eval(&rbf, &x, &x).unwrap(), 1.0);
        }
        assert!(kernel_eval(&rbf, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gram_kernels_match_direct_evaluation() {
        let rows = vec![vec![0.5, -1.0, 2.0], vec![1.5, 0.0, -0.5], vec![-2.0, 1.0, 1.0]];
        let gram = Gram::new(&rows);
        for k in [
            KernelSpec::Linear,
            KernelSpec::Rbf { gamma: 0.3 },
            KernelSpec::Poly { gamma: 0.5, degree: 3, coef0: 1.0 },
        ] {
            let m = gram.kernel(&k);
            for i in 0..3 {
                for j in 0..3 {
                    let direct = kernel_eval(&k, &rows[i], &rows[j]).unwrap();
                    assert!((m[i * 3 + j] - direct).abs() < 1e-12);
                }
            }
        }
        assert_eq!(submatrix(&gram.kernel(&KernelSpec::Linear), 3, &[2, 0]), vec![6.0, 0.0, 0.0, 5.25]);
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Poly { gamma: 1.0, degree: 0, coef0: 1.0 }.validate().is_err());
        assert!(KernelSpec::Linear.validate().is_ok());
        let json = serde_json::to_string(&KernelSpec::Rbf { gamma: 0.5 }).unwrap();
        assert_eq!(json, r#"{"kind":"rbf","gamma":0.5}"#);
    }
}
