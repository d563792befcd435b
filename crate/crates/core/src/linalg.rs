//! Small dense symmetric matrices and their spectra.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
    diagonal: bool,
}

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut data = vec![0.0; dim * dim];
        for (i, e) in entries.iter().enumerate() {
            data[i * dim + i] = *e;
        }
        SymMatrix {
            dim,
            data,
            diagonal: true,
        }
    }

    /// Builds from row-major entries; rejects asymmetric input.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        let mut diagonal = true;
        for i in 0..dim {
            for j in 0..dim {
                let a = data[i * dim + j];
                if !a.is_finite() {
                    return Err(invalid("A", "non-finite entry"));
                }
                if (a - data[j * dim + i]).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(invalid("A", "matrix is not symmetric"));
                }
                if i != j && a != 0.0 {
                    diagonal = false;
                }
            }
        }
        Ok(SymMatrix {
            dim,
            data,
            diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// `out = A * v`
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        if self.diagonal {
            for i in 0..n {
                out[i] = self.data[i * n + i] * v[i];
            }
            return;
        }
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// Eigenvalues in ascending order (cyclic Jacobi rotations).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        if self.diagonal {
            let mut ev: Vec<f64> = (0..n).map(|i| self.get(i, i)).collect();
            ev.sort_by(f64::total_cmp);
            return ev;
        }
        let mut a = self.data.clone();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}
