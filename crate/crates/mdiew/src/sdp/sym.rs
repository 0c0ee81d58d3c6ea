//! Dense real symmetric matrix helpers for the solver core.
//!
//! Everything is small (dimension ≤ ~40) and dense; plain loops throughout.

/// General dense square real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RMat {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl RMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn mul(&self, other: &RMat) -> RMat {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = RMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] += a * row[j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> RMat {
        RMat::from_fn(self.dim, |i, j| self.get(j, i))
    }

    /// Bᵀ·self·B.
    pub fn congruence(&self, b: &RMat) -> RMat {
        let t = self.mul(b);
        b.transpose().mul(&t)
    }

    pub fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &RMat, factor: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    /// Entrywise dot; equals tr(AB) when both are symmetric.
    pub fn dot(&self, other: &RMat) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi.
/// Values descending; vectors (columns) only when requested.
pub(crate) fn sym_eig(m: &RMat, want_vectors: bool) -> (Vec<f64>, Option<RMat>) {
    let n = m.dim;
    let mut a = m.clone();
    a.symmetrize();
    let mut v = if want_vectors { Some(RMat::identity(n)) } else { None };
    let norm: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let x = a.get(p, q);
                off += x * x;
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(i, q, s * aip + c * aiq);
                }
                for j in 0..n {
                    let apj = a.get(p, j);
                    let aqj = a.get(q, j);
                    a.set(p, j, c * apj - s * aqj);
                    a.set(q, j, s * apj + c * aqj);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                if let Some(vm) = v.as_mut() {
                    for i in 0..n {
                        let vip = vm.get(i, p);
                        let viq = vm.get(i, q);
                        vm.set(i, p, c * vip - s * viq);
                        vm.set(i, q, s * vip + c * viq);
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values: Vec<f64> = order.iter().map(|&k| a.get(k, k)).collect();
    let vectors = v.map(|vm| RMat::from_fn(n, |i, j| vm.get(i, order[j])));
    (values, vectors)
}

/// Lower Cholesky factor; `None` when the matrix is not numerically PD.
pub(crate) fn cholesky(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve L·Lᵀ·x = rhs given the lower factor.
pub(crate) fn cholesky_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut x = rhs.to_vec();
    for i in 0..n {
        let mut sum = x[i];
        for k in 0..i {
            sum -= l[i * n + k] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}
