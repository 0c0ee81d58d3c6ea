//! Small-scale semidefinite programming over Hermitian PSD blocks.
//!
//! Problems are stated as `min Σ tr(Cᵢ Xᵢ)` subject to affine equality
//! constraints `Σ tr(A_{k,i} Xᵢ) = b_k` and `Xᵢ ⪰ 0`. Complex blocks are
//! realified at the boundary; the solver core is purely real symmetric and
//! runs a homogeneous self-dual primal-dual path-following method with
//! Nesterov–Todd scaling, so primal infeasibility comes out as a Farkas
//! certificate rather than a divergence heuristic.

use crate::qlin::{eig_hermitian, HermitianMatrix};
use thiserror::Error;

mod dump;
mod solver;
pub(crate) mod sym;

pub use dump::write_dump;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("inconsistent problem structure: {0}")]
    Structure(String),
    #[error("invalid solver parameter: {0}")]
    Params(String),
}

/// Dense real symmetric matrix; the realified image of a Hermitian block.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RealSymMatrix {
    pub(crate) fn from_rmat(m: sym::RMat) -> Self {
        Self { dim: m.dim, data: m.data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = sym::RMat { dim: self.dim, data: self.data.clone() };
        sym::sym_eig(&m, false).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("nonempty spectrum")
    }
}

/// Embed a Hermitian matrix as `[[Re h, −Im h], [Im h, Re h]]`.
///
/// The embedding is PSD exactly when `h` is, and doubles both trace and
/// eigenvalue multiplicities.
pub fn realify(h: &HermitianMatrix) -> RealSymMatrix {
    let n = h.dim();
    let mut m = sym::RMat::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h.get(i, j);
            m.set(i, j, z.re);
            m.set(n + i, n + j, z.re);
            m.set(i, n + j, -z.im);
            m.set(n + i, j, z.im);
        }
    }
    RealSymMatrix::from_rmat(m)
}

/// Whether a block variable is complex Hermitian (realified internally) or
/// genuinely real symmetric (solved as-is, with no imaginary degrees of
/// freedom).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Hermitian,
    RealSymmetric,
}

#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
    pub kind: BlockKind,
}

impl BlockSpec {
    pub fn hermitian(name: impl Into<String>, dim: usize) -> Self {
        Self { name: name.into(), dim, kind: BlockKind::Hermitian }
    }

    pub fn real(name: impl Into<String>, dim: usize) -> Self {
        Self { name: name.into(), dim, kind: BlockKind::RealSymmetric }
    }
}

/// One affine equality `Σ tr(coeff_i · X_{block_i}) = rhs`.
///
/// Coefficient matrices for real-symmetric blocks must have zero imaginary
/// part.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(usize, HermitianMatrix)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub name: String,
    pub blocks: Vec<BlockSpec>,
    /// Objective coefficient per block (minimize `Σ tr(Cᵢ Xᵢ)`).
    pub objective: Vec<HermitianMatrix>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    /// Structural validation: dimensions, block indices, realness of
    /// coefficients on real blocks.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.blocks.len() {
            return Err(SdpError::Structure(format!(
                "{} objective matrices for {} blocks",
                self.objective.len(),
                self.blocks.len()
            )));
        }
        for (i, (spec, c)) in self.blocks.iter().zip(&self.objective).enumerate() {
            if spec.dim == 0 {
                return Err(SdpError::Structure(format!("block {i} has dim 0")));
            }
            if c.dim() != spec.dim {
                return Err(SdpError::Structure(format!(
                    "objective for block {i} has dim {} ≠ {}",
                    c.dim(),
                    spec.dim
                )));
            }
            if spec.kind == BlockKind::RealSymmetric && !is_real(c) {
                return Err(SdpError::Structure(format!(
                    "objective for real block {i} has imaginary entries"
                )));
            }
        }
        for (k, con) in self.constraints.iter().enumerate() {
            for (bi, a) in &con.terms {
                let spec = self.blocks.get(*bi).ok_or_else(|| {
                    SdpError::Structure(format!("constraint {k} references block {bi}"))
                })?;
                if a.dim() != spec.dim {
                    return Err(SdpError::Structure(format!(
                        "constraint {k} coefficient for block {bi} has dim {} ≠ {}",
                        a.dim(),
                        spec.dim
                    )));
                }
                if spec.kind == BlockKind::RealSymmetric && !is_real(a) {
                    return Err(SdpError::Structure(format!(
                        "constraint {k} coefficient for real block {bi} has imaginary entries"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn is_real(h: &HermitianMatrix) -> bool {
    let n = h.dim();
    for i in 0..n {
        for j in 0..n {
            if h.get(i, j).im.abs() > 1e-14 {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Absolute duality-gap target.
    pub eps_gap: f64,
    /// Equality-feasibility target (also the dual residual target).
    pub eps_feas: f64,
    /// PSD slack allowed when judging block eigenvalues.
    pub eps_psd: f64,
    pub max_iter: usize,
    /// Tolerance for declaring a redundant equality row inconsistent
    /// (raw tables that admit no PSD model fail here).
    pub consistency_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            eps_gap: 1e-7,
            eps_feas: 1e-8,
            eps_psd: 1e-9,
            max_iter: 200,
            consistency_tol: 1e-8,
        }
    }
}

impl SolverParams {
    fn validate(&self) -> Result<(), SdpError> {
        if !(self.eps_gap > 0.0 && self.eps_feas > 0.0 && self.eps_psd > 0.0) {
            return Err(SdpError::Params("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SdpError::Params("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Farkas-style evidence of primal infeasibility: multipliers `y` with
/// `bᵀy > 0` while `Σ y_k A_k` is negative semidefinite up to the recorded
/// residual.
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    pub multipliers: Vec<f64>,
    /// `bᵀy` of the improving ray (normalized to 1 when possible).
    pub objective_gain: f64,
    /// Max eigenvalue of `Σ y_k A_k` per block (should be ≤ residual).
    pub ray_slack_max_eig: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_blocks: Vec<HermitianMatrix>,
    /// One multiplier per original constraint row (zeros on rows eliminated
    /// as redundant during preprocessing).
    pub dual_multipliers: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub certificate: Option<InfeasibilityCertificate>,
}

/// Solve the problem; `status` distinguishes optimal, infeasible, and
/// iteration-budget outcomes. Deterministic for identical inputs.
pub fn solve(problem: &SdpProblem, params: &SolverParams) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    params.validate()?;
    maybe_dump(problem);
    solver::solve_validated(problem, params)
}

/// Independent recomputation of feasibility residuals, block eigenvalues,
/// objectives and gap for a candidate solution.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub primal_residual_max: f64,
    pub primal_min_eig: f64,
    pub dual_slack_min_eig: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
}

impl SolutionReport {
    pub fn within(&self, params: &SolverParams) -> bool {
        self.primal_residual_max <= params.eps_feas
            && self.primal_min_eig >= -params.eps_psd
            && self.dual_slack_min_eig >= -params.eps_psd
            && self.gap.abs() <= params.eps_gap
    }
}

pub fn check_solution(problem: &SdpProblem, solution: &SdpSolution) -> SolutionReport {
    let mut primal_residual_max = 0.0f64;
    for (k, con) in problem.constraints.iter().enumerate() {
        let mut lhs = 0.0;
        for (bi, a) in &con.terms {
            lhs += a.trace_product(&solution.primal_blocks[*bi]);
        }
        let _ = k;
        primal_residual_max = primal_residual_max.max((lhs - con.rhs).abs());
    }

    let mut primal_min_eig = f64::INFINITY;
    for x in &solution.primal_blocks {
        primal_min_eig = primal_min_eig.min(x.min_eigenvalue());
    }

    let mut dual_slack_min_eig = f64::INFINITY;
    for (i, c) in problem.objective.iter().enumerate() {
        let mut slack = c.clone();
        for (k, con) in problem.constraints.iter().enumerate() {
            let y = solution.dual_multipliers[k];
            if y == 0.0 {
                continue;
            }
            for (bi, a) in &con.terms {
                if *bi == i {
                    slack = slack.sub(&a.scale(y));
                }
            }
        }
        let eig = eig_hermitian(&slack);
        dual_slack_min_eig = dual_slack_min_eig.min(*eig.values.last().unwrap());
    }

    let primal_objective: f64 = problem
        .objective
        .iter()
        .zip(&solution.primal_blocks)
        .map(|(c, x)| c.trace_product(x))
        .sum();
    let dual_objective: f64 = problem
        .constraints
        .iter()
        .zip(&solution.dual_multipliers)
        .map(|(con, y)| con.rhs * y)
        .sum();

    SolutionReport {
        primal_residual_max,
        primal_min_eig,
        dual_slack_min_eig,
        primal_objective,
        dual_objective,
        gap: primal_objective - dual_objective,
    }
}

/// Honors `MDIEW_SOLVER_DUMP=dir`: every solved problem is written in the
/// debug dump format with a process-unique sequence number.
fn maybe_dump(problem: &SdpProblem) {
    use std::sync::atomic::{AtomicU64, Ordering};
    static SEQ: AtomicU64 = AtomicU64::new(0);
    let Ok(dir) = std::env::var("MDIEW_SOLVER_DUMP") else {
        return;
    };
    if dir.is_empty() {
        return;
    }
    let seq = SEQ.fetch_add(1, Ordering::Relaxed);
    let path = std::path::Path::new(&dir).join(format!("{:05}_{}.sdp", seq, problem.name));
    if let Ok(mut f) = std::fs::File::create(path) {
        let _ = write_dump(problem, &mut f);
    }
}
