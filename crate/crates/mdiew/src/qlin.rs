//! Dense complex linear algebra and two-qubit state primitives.
//!
//! Everything in this module is small and dense: dimensions are 2, 4 or 16.
//! Matrices are immutable after construction and safe to share across
//! threads; all operations are pure functions.

use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Hermiticity tolerance enforced at construction.
pub const TOL_HERM: f64 = 1e-12;
const TOL_TRACE: f64 = 1e-10;
const TOL_PSD: f64 = 1e-10;
const TOL_KET_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QlinError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (max deviation {max_dev:.3e})")]
    NotHermitian { max_dev: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not a valid density operator: {0}")]
    NotDensity(String),
}

/// Dense square complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// k-th column as a vector of amplitudes.
    pub fn column(&self, k: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, k)).collect()
    }
}

/// Hermitian matrix; construction symmetrizes `(m + m†)/2` so downstream
/// eigensolvers stay stable against rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    /// Build from raw row-major entries, rejecting input whose Hermitian
    /// deviation exceeds [`TOL_HERM`].
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self, QlinError> {
        if entries.len() != dim * dim {
            return Err(QlinError::DimensionMismatch(format!(
                "expected {} entries for dim {}, got {}",
                dim * dim,
                dim,
                entries.len()
            )));
        }
        let m = ComplexMatrix { dim, data: entries };
        let mut max_dev = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let dev = (m.get(i, j) - m.get(j, i).conj()).norm();
                if dev > max_dev {
                    max_dev = dev;
                }
            }
        }
        if max_dev > TOL_HERM {
            return Err(QlinError::NotHermitian { max_dev });
        }
        Ok(Self::symmetrize(m))
    }

    /// Build from a closure over `(row, col)`; the result is symmetrized
    /// without a Hermiticity check. Intended for constructions that are
    /// Hermitian by design.
    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::symmetrize(ComplexMatrix::from_fn(dim, f))
    }

    fn symmetrize(m: ComplexMatrix) -> Self {
        let dim = m.dim;
        let sym = ComplexMatrix::from_fn(dim, |i, j| (m.get(i, j) + m.get(j, i).conj()) * 0.5);
        Self { inner: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { inner: ComplexMatrix::zeros(dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { inner: ComplexMatrix::identity(dim) }
    }

    pub fn scaled_identity(dim: usize, r: f64) -> Self {
        Self::from_fn(dim, |i, j| if i == j { C64::new(r, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner.get(i, j)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "matrix sum dimension mismatch");
        Self::from_fn(self.dim(), |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "matrix difference dimension mismatch");
        Self::from_fn(self.dim(), |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, r: f64) -> Self {
        Self::from_fn(self.dim(), |i, j| self.get(i, j) * r)
    }

    /// tr(AB); real for Hermitian A, B.
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "trace product dimension mismatch");
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.get(i, j) * other.get(j, i)).re;
            }
        }
        acc
    }

    /// U · self · U† for a unitary `u`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        assert_eq!(self.dim(), u.dim(), "conjugation dimension mismatch");
        let prod = u.mul(&self.inner).mul(&u.adjoint());
        Self::symmetrize(prod)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let mut m = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                m = m.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        m
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = eig_hermitian(self);
        *eig.values.last().expect("nonempty spectrum")
    }
}

/// Kronecker product; `(a ⊗ b)[(i·db+k),(j·db+l)] = a[i][j]·b[k][l]`.
pub fn tensor(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    let (da, db) = (a.dim(), b.dim());
    HermitianMatrix::from_fn(da * db, |r, c| {
        let (i, k) = (r / db, r % db);
        let (j, l) = (c / db, c % db);
        a.get(i, j) * b.get(k, l)
    })
}

/// Tensor factor selected by [`partial_transpose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Transpose one tensor factor of a bipartite operator on `dims.0 × dims.1`.
///
/// Preserves the trace and is an involution on the same side.
pub fn partial_transpose(
    m: &HermitianMatrix,
    dims: (usize, usize),
    side: Subsystem,
) -> Result<HermitianMatrix, QlinError> {
    let (da, db) = dims;
    if da * db != m.dim() {
        return Err(QlinError::DimensionMismatch(format!(
            "partial transpose of dim {} with factors {}×{}",
            m.dim(),
            da,
            db
        )));
    }
    Ok(HermitianMatrix::from_fn(m.dim(), |r, c| {
        let (i, k) = (r / db, r % db);
        let (j, l) = (c / db, c % db);
        match side {
            Subsystem::A => m.get(j * db + k, i * db + l),
            Subsystem::B => m.get(i * db + l, j * db + k),
        }
    }))
}

/// Eigendecomposition of a Hermitian matrix: values descending, orthonormal
/// eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// ‖V·diag(λ)·V† − m‖_F for a reconstruction check.
    pub fn reconstruction_residual(&self, m: &HermitianMatrix) -> f64 {
        let n = m.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += self.vectors.get(i, k) * self.values[k] * self.vectors.get(j, k).conj();
                }
                acc += (s - m.get(i, j)).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Adequate and robust at the dimensions used here (≤ 16); terminates when
/// the off-diagonal Frobenius mass falls below `1e-14 · ‖m‖_F`.
pub fn eig_hermitian(m: &HermitianMatrix) -> HermitianEig {
    let n = m.dim();
    let mut a = m.inner.clone();
    let mut v = ComplexMatrix::identity(n);
    let norm = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * norm;

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let abs_apq = apq.norm();
                if abs_apq <= 1e-300 {
                    continue;
                }
                // Phase factor making the 2×2 pivot block real, then a
                // classic symmetric Schur rotation.
                let phase = apq / abs_apq;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // R = diag(1, conj(phase)) · [[c, s], [−s, c]] on coords (p, q).
                let r00 = C64::new(c, 0.0);
                let r01 = C64::new(s, 0.0);
                let r10 = -phase.conj() * s;
                let r11 = phase.conj() * c;
                // Columns: A ← A·R, V ← V·R.
                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, aip * r00 + aiq * r10);
                    a.set(i, q, aip * r01 + aiq * r11);
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip * r00 + viq * r10);
                    v.set(i, q, vip * r01 + viq * r11);
                }
                // Rows: A ← R†·A.
                for j in 0..n {
                    let apj = a.get(p, j);
                    let aqj = a.get(q, j);
                    a.set(p, j, r00.conj() * apj + r10.conj() * aqj);
                    a.set(q, j, r01.conj() * apj + r11.conj() * aqj);
                }
                let re_pp = a.get(p, p).re;
                let re_qq = a.get(q, q).re;
                a.set(p, p, C64::new(re_pp, 0.0));
                a.set(q, q, C64::new(re_qq, 0.0));
                a.set(p, q, C64::new(0.0, 0.0));
                a.set(q, p, C64::new(0.0, 0.0));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).re.partial_cmp(&a.get(i, i).re).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| a.get(k, k).re).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| v.get(i, order[j]));
    HermitianEig { values, vectors }
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureKet {
    amplitudes: Vec<C64>,
}

impl PureKet {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self, QlinError> {
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > TOL_KET_NORM {
            return Err(QlinError::Domain(format!(
                "ket norm² = {norm_sq}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.amplitudes[i]
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Rank-1 projector |ψ⟩⟨ψ|.
    pub fn projector(&self) -> HermitianMatrix {
        HermitianMatrix::from_fn(self.dim(), |i, j| {
            self.amplitudes[i] * self.amplitudes[j].conj()
        })
    }
}

/// The four Bell-state measurement outcomes, in the fixed outcome order used
/// by every table in this crate.
///
/// Kets live in the (polarization ⊗ path) ordered 4-dimensional basis:
/// |Ψ±⟩ = (|H⟩|1⟩ ± |V⟩|0⟩)/√2 and |Φ±⟩ = (|H⟩|0⟩ ± |V⟩|1⟩)/√2, with
/// H ↦ 0, V ↦ 1.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
pub enum BellState {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PsiPlus,
        BellState::PsiMinus,
        BellState::PhiPlus,
        BellState::PhiMinus,
    ];

    pub fn index(self) -> usize {
        match self {
            BellState::PsiPlus => 0,
            BellState::PsiMinus => 1,
            BellState::PhiPlus => 2,
            BellState::PhiMinus => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            BellState::PsiPlus => "PsiPlus",
            BellState::PsiMinus => "PsiMinus",
            BellState::PhiPlus => "PhiPlus",
            BellState::PhiMinus => "PhiMinus",
        }
    }

    pub fn ket(self) -> PureKet {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let p = C64::new(r, 0.0);
        let m = C64::new(-r, 0.0);
        let amps = match self {
            BellState::PsiPlus => vec![z, p, p, z],
            BellState::PsiMinus => vec![z, p, m, z],
            BellState::PhiPlus => vec![p, z, z, p],
            BellState::PhiMinus => vec![p, z, z, m],
        };
        PureKet::new(amps).expect("Bell kets are unit norm")
    }
}

/// Trace-one positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: HermitianMatrix,
}

impl DensityOperator {
    pub fn new(matrix: HermitianMatrix) -> Result<Self, QlinError> {
        let tr = matrix.trace();
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(QlinError::NotDensity(format!("trace = {tr}, expected 1")));
        }
        let min_eig = matrix.min_eigenvalue();
        if min_eig < -TOL_PSD {
            return Err(QlinError::NotDensity(format!(
                "minimum eigenvalue = {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_pure(ket: &PureKet) -> Self {
        Self { matrix: ket.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64) }
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// λ·|Ψ⁺⟩⟨Ψ⁺| + (1−λ)·I₄/4 on two qubits.
pub fn werner_state(lambda: f64) -> Result<DensityOperator, QlinError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(QlinError::Domain(format!(
            "Werner weight λ = {lambda} outside [0, 1]"
        )));
    }
    let bell = BellState::PsiPlus.ket().projector();
    let mixed = HermitianMatrix::scaled_identity(4, 0.25);
    let m = bell.scale(lambda).add(&mixed.scale(1.0 - lambda));
    DensityOperator::new(m)
}

/// Sum of |negative eigenvalues| of the partial transpose over the given
/// bipartition. Zero exactly for PPT (in particular product) states.
pub fn negativity(rho: &DensityOperator, dims: (usize, usize)) -> Result<f64, QlinError> {
    let pt = partial_transpose(rho.matrix(), dims, Subsystem::A)?;
    let eig = eig_hermitian(&pt);
    Ok(eig.values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianMatrix {
        let raw = ComplexMatrix::from_fn(dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        HermitianMatrix::from_fn(dim, |i, j| (raw.get(i, j) + raw.get(j, i).conj()) * 0.5)
    }

    #[test]
    fn tensor_identity_case() {
        let i2 = HermitianMatrix::identity(2);
        let i4 = HermitianMatrix::identity(4);
        assert!(tensor(&i2, &i2).approx_eq(&i4, 0.0));
    }

    #[test]
    fn tensor_basis_projectors() {
        let p0 = HermitianMatrix::from_fn(2, |i, j| {
            if i == 0 && j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        let p1 = HermitianMatrix::from_fn(2, |i, j| {
            if i == 1 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        let t = tensor(&p0, &p1);
        let expected = HermitianMatrix::from_fn(4, |i, j| {
            if i == 1 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        assert!(t.approx_eq(&expected, 0.0));
    }

    #[test]
    fn bell_projector_matches_entrywise_construction() {
        // |Ψ⁺⟩⟨Ψ⁺| built by tensor-free elementwise formula:
        // entries 1/2 at the {1,2}×{1,2} block, 0 elsewhere.
        let proj = BellState::PsiPlus.ket().projector();
        let oracle = HermitianMatrix::from_fn(4, |i, j| {
            if (i == 1 || i == 2) && (j == 1 || j == 2) {
                c(0.5, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(proj.approx_eq(&oracle, 1e-15));
    }

    #[test]
    fn partial_transpose_identity_invariant() {
        let i4 = HermitianMatrix::identity(4);
        let pt = partial_transpose(&i4, (2, 2), Subsystem::A).unwrap();
        assert!(pt.approx_eq(&i4, 0.0));
    }

    #[test]
    fn partial_transpose_bell_spectrum() {
        let proj = BellState::PsiPlus.ket().projector();
        let pt = partial_transpose(&proj, (2, 2), Subsystem::A).unwrap();
        let eig = eig_hermitian(&pt);
        let expected = [0.5, 0.5, 0.5, -0.5];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "eigenvalue {v} vs {e}");
        }
    }

    #[test]
    fn partial_transpose_product_state_is_psd() {
        let zero = PureKet::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let plus = PureKet::new(vec![
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let rho = tensor(&zero.projector(), &plus.projector());
        let pt = partial_transpose(&rho, (2, 2), Subsystem::A).unwrap();
        assert!(pt.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn partial_transpose_dimension_mismatch() {
        let i4 = HermitianMatrix::identity(4);
        assert!(partial_transpose(&i4, (2, 3), Subsystem::A).is_err());
    }

    #[test]
    fn eig_diagonal() {
        let m = HermitianMatrix::from_fn(2, |i, j| {
            if i != j {
                c(0.0, 0.0)
            } else if i == 0 {
                c(3.0, 0.0)
            } else {
                c(1.0, 0.0)
            }
        });
        let eig = eig_hermitian(&m);
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_pauli_x() {
        let m = HermitianMatrix::from_fn(2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let eig = eig_hermitian(&m);
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_hermitian(&mut rng, 4);
            let eig = eig_hermitian(&m);
            let res = eig.reconstruction_residual(&m);
            assert!(
                res <= 1e-10 * m.frobenius_norm().max(1.0),
                "reconstruction residual {res}"
            );
        }
    }

    #[test]
    fn eig_rejects_gross_asymmetry() {
        let entries = vec![c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)];
        assert!(matches!(
            HermitianMatrix::new(2, entries),
            Err(QlinError::NotHermitian { .. })
        ));
    }

    #[test]
    fn bell_kets_match_fixed_amplitudes() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let phi_plus = BellState::PhiPlus.ket();
        assert_eq!(phi_plus.amplitudes(), &[c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)]);
        let psi_minus = BellState::PsiMinus.ket();
        assert_eq!(psi_minus.amplitudes(), &[c(0.0, 0.0), c(r, 0.0), c(-r, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn bell_kets_orthonormal_and_complete() {
        for (i, a) in BellState::ALL.iter().enumerate() {
            for (j, b) in BellState::ALL.iter().enumerate() {
                let ip = a.ket().inner(&b.ket());
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip.norm() - expected).abs() < 1e-12);
            }
        }
        let mut sum = HermitianMatrix::zeros(4);
        for b in BellState::ALL {
            sum = sum.add(&b.ket().projector());
        }
        assert!(sum.approx_eq(&HermitianMatrix::identity(4), 1e-12));
    }

    #[test]
    fn werner_limits() {
        let mixed = werner_state(0.0).unwrap();
        assert!(mixed
            .matrix()
            .approx_eq(&HermitianMatrix::scaled_identity(4, 0.25), 1e-15));
        let pure = werner_state(1.0).unwrap();
        assert!(pure
            .matrix()
            .approx_eq(&BellState::PsiPlus.ket().projector(), 1e-15));
        assert!(werner_state(-0.1).is_err());
        assert!(werner_state(1.5).is_err());
    }

    #[test]
    fn werner_boundary_partial_transpose() {
        let rho = werner_state(1.0 / 3.0).unwrap();
        let pt = partial_transpose(rho.matrix(), (2, 2), Subsystem::A).unwrap();
        assert!(pt.min_eigenvalue().abs() < 1e-12);
    }

    #[test]
    fn negativity_reference_values() {
        assert!((negativity(&werner_state(1.0).unwrap(), (2, 2)).unwrap() - 0.5).abs() < 1e-12);
        assert!(negativity(&werner_state(1.0 / 3.0).unwrap(), (2, 2)).unwrap() < 1e-12);
        let zero = PureKet::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let prod = DensityOperator::new(tensor(&zero.projector(), &zero.projector())).unwrap();
        assert!(negativity(&prod, (2, 2)).unwrap() < 1e-14);
    }

    proptest! {
        #[test]
        fn tensor_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(&mut rng, 2);
            let b = random_hermitian(&mut rng, 2);
            let d = random_hermitian(&mut rng, 2);
            let left = tensor(&tensor(&a, &b), &d);
            let right = tensor(&a, &tensor(&b, &d));
            prop_assert!(left.max_abs_diff(&right) <= 1e-14);
        }

        #[test]
        fn partial_transpose_involution_and_trace(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_hermitian(&mut rng, 4);
            for side in [Subsystem::A, Subsystem::B] {
                let pt = partial_transpose(&m, (2, 2), side).unwrap();
                let back = partial_transpose(&pt, (2, 2), side).unwrap();
                prop_assert!(back.max_abs_diff(&m) == 0.0);
                prop_assert!((pt.trace() - m.trace()).abs() <= 1e-12);
            }
        }

        #[test]
        fn werner_negativity_formula(lambda in 0.0f64..=1.0) {
            let rho = werner_state(lambda).unwrap();
            let neg = negativity(&rho, (2, 2)).unwrap();
            let expected = ((3.0 * lambda - 1.0) / 4.0).max(0.0);
            prop_assert!((neg - expected).abs() <= 1e-10);
        }
    }
}
