//! Small dense linear algebra for desk-scale problems (n <= 10 or so).
//!
//! Everything here is deterministic and dependency-free. Eigenvalues of
//! symmetric matrices come from the cyclic Jacobi method, which is foolproof
//! for small dense symmetric matrices; spectral norms of general matrices go
//! through the symmetric eigenproblem of `A^T A`.

use std::fmt;

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row-major data; `data.len()` must equal `n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * n).then_some(Matrix { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Matrix {
            n,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// `self += scale * v v^T`. The result stays exactly symmetric because the
    /// (i, j) and (j, i) updates use the same product.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        assert_eq!(v.len(), self.n, "outer-product dimension mismatch");
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] += scale * v[i] * v[j];
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn symmetric_part(&self) -> Matrix {
        let mut s = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                s.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        s
    }

    /// Largest entry of `|A - A^T|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..self.n {
                    out.data[i * self.n + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    /// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, in
    /// ascending order. The input is symmetrized first, so callers should
    /// check asymmetry separately when it matters.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.symmetric_part();
        if n == 0 {
            return Vec::new();
        }
        let scale = a.max_abs().max(1e-300);
        let tol = 1e-15 * scale;
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= tol * 1e-2 {
                        continue;
                    }
                    // Rotation annihilating a[p][q] (Numerical Recipes 11.1).
                    let h = a.get(q, q) - a.get(p, p);
                    let t = if apq.abs() * 1e12 < h.abs() {
                        apq / h
                    } else {
                        let theta = 0.5 * h / apq;
                        let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            t = -t;
                        }
                        t
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let hpq = t * apq;
                    a.set(p, p, a.get(p, p) - hpq);
                    a.set(q, q, a.get(q, q) + hpq);
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    for j in 0..n {
                        if j == p || j == q {
                            continue;
                        }
                        let g = a.get(j, p);
                        let h2 = a.get(j, q);
                        a.set(j, p, g - s * (h2 + g * tau));
                        a.set(p, j, a.get(j, p));
                        a.set(j, q, h2 + s * (g - h2 * tau));
                        a.set(q, j, a.get(j, q));
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_symmetric_eigenvalue(&self) -> f64 {
        self.symmetric_eigenvalues()[0]
    }

    /// Spectral norm (largest singular value), via eigenvalues of `A^T A`.
    pub fn spectral_norm(&self) -> f64 {
        let gram = self.transpose().mul(self);
        let eigs = gram.symmetric_eigenvalues();
        eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| format!("{:.6}", self.get(i, j)))
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "sub dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy dimension mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
