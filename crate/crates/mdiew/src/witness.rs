//! The witness engine: recover joint measurement operators compatible with a
//! correlation table under a PSD constraint, split their partial transposes
//! into positive and negative parts, and certify entanglement from the
//! negative weight. Dual multipliers of the same programs yield reusable
//! linear witness coefficients.
//!
//! For each outcome pair (a, b) the primal program is
//!
//! ```text
//! minimize   tr(σ⁻)
//! subject to σ⁺ − σ⁻ − Π^{T_A} = 0
//!            tr(Π (τ_x ⊗ τ_y)) = P(a,b|x,y)   for all x, y
//!            Π, σ⁺, σ⁻ ⪰ 0
//! ```
//!
//! and the witness value is `W′ = −Σ_ab tr(σ⁻_ab) ≤ 0`, with `W′ < 0` only
//! when no separable model reproduces the table. The dual multipliers γ of
//! the trace constraints give coefficients β = −γ such that `Σ β·P` bounds
//! `W′` from above on any table taken with the same input states.

use crate::qlin::{
    eig_hermitian, partial_transpose, BellState, HermitianMatrix, QlinError, Subsystem, C64,
};
use crate::scenario::{
    cell_index, input_pair_tensors, pair_index, reconstruct_probabilities, CorrelationTable,
    CountTable, InputStateSet, ScenarioError, N_CELLS, N_INPUTS, N_OUTCOMES, N_PAIRS,
};
use crate::sdp::{
    solve, BlockSpec, Constraint, SdpError, SdpProblem, SdpSolution, SolveStatus, SolverParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error(
        "table admits no PSD joint measurement ({0}); regularize the table before witnessing"
    )]
    InfeasibleTable(String),
    #[error("solver did not converge: {0}")]
    SolverFailure(String),
    #[error("input-set mismatch: coefficients are bound to {expected:?}, got {found:?}")]
    InputSetMismatch { expected: String, found: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Qlin(#[from] QlinError),
}

/// Solver settings for the witness programs. Tighter than the general
/// defaults because sixteen per-outcome objectives add up and the boundary
/// cases sit at zero.
pub fn witness_solver_params() -> SolverParams {
    SolverParams {
        eps_gap: 1e-8,
        eps_feas: 1e-8,
        eps_psd: 1e-9,
        max_iter: 300,
        consistency_tol: 1e-8,
    }
}

/// Orthonormal basis of n×n Hermitian matrices under ⟨A,B⟩ = tr(AB):
/// diagonal units, then symmetric and antisymmetric off-diagonal pairs.
fn hermitian_basis(n: usize) -> Vec<HermitianMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        basis.push(HermitianMatrix::from_fn(n, |a, b| {
            if a == i && b == i {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            basis.push(HermitianMatrix::from_fn(n, |a, b| {
                if (a, b) == (i, j) || (a, b) == (j, i) {
                    C64::new(r, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            basis.push(HermitianMatrix::from_fn(n, |a, b| {
                if (a, b) == (i, j) {
                    C64::new(0.0, r)
                } else if (a, b) == (j, i) {
                    C64::new(0.0, -r)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
        }
    }
    basis
}

/// Constraint layout of one per-outcome program: 16 coupling rows tying
/// σ⁺ − σ⁻ to Π^{T_A}, then the 36 table rows in (x, y) order.
const COUPLING_ROWS: usize = 16;

/// Interior lift applied to projected operators when rebuilding a
/// regularized table.
const PSD_LIFT: f64 = 1e-8;

fn outcome_problem(
    t: &CorrelationTable,
    pairs: &[HermitianMatrix],
    basis: &[HermitianMatrix],
    basis_pt: &[HermitianMatrix],
    a: usize,
    b: usize,
) -> SdpProblem {
    let mut constraints = Vec::with_capacity(COUPLING_ROWS + N_PAIRS);
    for r in 0..COUPLING_ROWS {
        constraints.push(Constraint {
            terms: vec![
                (0, basis_pt[r].scale(-1.0)),
                (1, basis[r].clone()),
                (2, basis[r].scale(-1.0)),
            ],
            rhs: 0.0,
        });
    }
    for x in 0..N_INPUTS {
        for y in 0..N_INPUTS {
            constraints.push(Constraint {
                terms: vec![(0, pairs[pair_index(x, y)].clone())],
                rhs: t.get_idx(a, b, x, y),
            });
        }
    }
    SdpProblem {
        name: format!("witness_a{a}_b{b}"),
        blocks: vec![
            BlockSpec::hermitian("pi", 4),
            BlockSpec::hermitian("sigma_plus", 4),
            BlockSpec::hermitian("sigma_minus", 4),
        ],
        objective: vec![
            HermitianMatrix::zeros(4),
            HermitianMatrix::zeros(4),
            HermitianMatrix::identity(4),
        ],
        constraints,
    }
}

/// The sixteen per-outcome programs assembled as one block-diagonal problem
/// (48 PSD blocks, 832 equality rows). The per-outcome solves used by
/// [`compute_w_prime`] optimize the same objective; this form exists for
/// whole-problem cross-checks and external dumps.
pub fn assemble_witness_problem(
    t: &CorrelationTable,
    inputs: &InputStateSet,
) -> Result<SdpProblem, WitnessError> {
    check_table_inputs(t, inputs)?;
    let pairs = input_pair_tensors(inputs);
    let basis = hermitian_basis(4);
    let basis_pt: Vec<HermitianMatrix> = basis
        .iter()
        .map(|e| partial_transpose(e, (2, 2), Subsystem::A).expect("4 = 2×2"))
        .collect();
    let mut blocks = Vec::with_capacity(48);
    let mut objective = Vec::with_capacity(48);
    let mut constraints = Vec::new();
    for a in 0..N_OUTCOMES {
        for b in 0..N_OUTCOMES {
            let base = blocks.len();
            blocks.push(BlockSpec::hermitian(format!("pi_a{a}_b{b}"), 4));
            blocks.push(BlockSpec::hermitian(format!("sigma_plus_a{a}_b{b}"), 4));
            blocks.push(BlockSpec::hermitian(format!("sigma_minus_a{a}_b{b}"), 4));
            objective.push(HermitianMatrix::zeros(4));
            objective.push(HermitianMatrix::zeros(4));
            objective.push(HermitianMatrix::identity(4));
            for r in 0..COUPLING_ROWS {
                constraints.push(Constraint {
                    terms: vec![
                        (base, basis_pt[r].scale(-1.0)),
                        (base + 1, basis[r].clone()),
                        (base + 2, basis[r].scale(-1.0)),
                    ],
                    rhs: 0.0,
                });
            }
            for x in 0..N_INPUTS {
                for y in 0..N_INPUTS {
                    constraints.push(Constraint {
                        terms: vec![(base, pairs[pair_index(x, y)].clone())],
                        rhs: t.get_idx(a, b, x, y),
                    });
                }
            }
        }
    }
    Ok(SdpProblem { name: "witness_full".into(), blocks, objective, constraints })
}

fn check_table_inputs(t: &CorrelationTable, inputs: &InputStateSet) -> Result<(), WitnessError> {
    if t.input_set_id() != inputs.id() {
        return Err(WitnessError::InputSetMismatch {
            expected: inputs.id().to_string(),
            found: t.input_set_id().to_string(),
        });
    }
    Ok(())
}

struct WitnessSolve {
    solutions: Vec<SdpSolution>,
    status: SolveStatus,
}

fn solve_witness_programs(
    t: &CorrelationTable,
    inputs: &InputStateSet,
    params: &SolverParams,
) -> Result<WitnessSolve, WitnessError> {
    check_table_inputs(t, inputs)?;
    let pairs = input_pair_tensors(inputs);
    let basis = hermitian_basis(4);
    let basis_pt: Vec<HermitianMatrix> = basis
        .iter()
        .map(|e| partial_transpose(e, (2, 2), Subsystem::A).expect("4 = 2×2"))
        .collect();
    let mut solutions = Vec::with_capacity(16);
    let mut status = SolveStatus::Optimal;
    for a in 0..N_OUTCOMES {
        for b in 0..N_OUTCOMES {
            let problem = outcome_problem(t, &pairs, &basis, &basis_pt, a, b);
            let sol = solve(&problem, params)?;
            match sol.status {
                SolveStatus::Infeasible => {
                    return Err(WitnessError::InfeasibleTable(format!(
                        "outcome pair ({}, {})",
                        BellState::ALL[a].label(),
                        BellState::ALL[b].label()
                    )));
                }
                SolveStatus::MaxIterations => status = SolveStatus::MaxIterations,
                SolveStatus::Optimal => {}
            }
            solutions.push(sol);
        }
    }
    Ok(WitnessSolve { solutions, status })
}

/// Result of the primal witness programs.
#[derive(Debug, Clone)]
pub struct WitnessValue {
    /// `−Σ_ab tr(σ⁻_ab)`; at most zero, strictly negative only for
    /// entanglement-certifying tables.
    pub w_prime: f64,
    pub status: SolveStatus,
    /// Recovered joint measurement operators, index `a·4 + b`.
    pub joint_povm: Vec<HermitianMatrix>,
    /// `tr(σ⁻_ab)` per outcome pair, each nonnegative.
    pub sigma_minus_traces: Vec<f64>,
}

pub fn compute_w_prime(
    t: &CorrelationTable,
    inputs: &InputStateSet,
) -> Result<WitnessValue, WitnessError> {
    compute_w_prime_with_params(t, inputs, &witness_solver_params())
}

pub fn compute_w_prime_with_params(
    t: &CorrelationTable,
    inputs: &InputStateSet,
    params: &SolverParams,
) -> Result<WitnessValue, WitnessError> {
    let solve = solve_witness_programs(t, inputs, params)?;
    let mut joint_povm = Vec::with_capacity(16);
    let mut sigma_minus_traces = Vec::with_capacity(16);
    let mut w_prime = 0.0;
    for sol in &solve.solutions {
        let tr = sol.primal_blocks[2].trace();
        w_prime -= tr;
        sigma_minus_traces.push(tr);
        joint_povm.push(sol.primal_blocks[0].clone());
    }
    Ok(WitnessValue { w_prime, status: solve.status, joint_povm, sigma_minus_traces })
}

/// Reusable witness coefficients β plus the dual matrices that certify them.
///
/// The stored (β, Y) pair is dual feasible: `0 ⪯ Y_ab ⪯ I` and
/// `Σ_xy β_abxy (τ_x ⊗ τ_y) − Y_ab^{T_A} ⪰ 0`, which by weak duality makes
/// `Σ β·P` an upper bound on `W′` for any table over the same input set —
/// so a negative evaluation is sound evidence of entanglement.
#[derive(Debug, Clone)]
pub struct WitnessCoefficients {
    beta: Vec<f64>,
    input_set_id: String,
    dual_y: Vec<HermitianMatrix>,
    pub provenance: String,
}

#[derive(Serialize, Deserialize)]
struct BetaCell {
    x: u8,
    y: u8,
    a: BellState,
    b: BellState,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct CoefficientsFile {
    input_set_id: String,
    provenance: String,
    beta: Vec<BetaCell>,
    #[serde(rename = "dual_Y")]
    dual_y: Vec<Vec<Vec<[f64; 2]>>>,
}

impl WitnessCoefficients {
    pub fn new(
        beta: Vec<f64>,
        input_set_id: String,
        dual_y: Vec<HermitianMatrix>,
        provenance: String,
    ) -> Result<Self, WitnessError> {
        if beta.len() != N_CELLS {
            return Err(WitnessError::Domain(format!(
                "expected {N_CELLS} coefficients, got {}",
                beta.len()
            )));
        }
        if dual_y.len() != 16 || dual_y.iter().any(|y| y.dim() != 4) {
            return Err(WitnessError::Domain(
                "expected sixteen 4×4 dual matrices".into(),
            ));
        }
        Ok(Self { beta, input_set_id, dual_y, provenance })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_at(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.beta[cell_index(a, b, x, y)]
    }

    pub fn input_set_id(&self) -> &str {
        &self.input_set_id
    }

    pub fn dual_y(&self) -> &[HermitianMatrix] {
        &self.dual_y
    }

    /// Worst violation of the dual-feasibility conditions against the given
    /// input set (0 means exactly feasible; solver output is ≲ 1e-8).
    pub fn dual_feasibility_violation(&self, inputs: &InputStateSet) -> f64 {
        let pairs = input_pair_tensors(inputs);
        let mut worst = 0.0f64;
        for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                let y = &self.dual_y[a * N_OUTCOMES + b];
                let eig_y = eig_hermitian(y);
                worst = worst.max(-eig_y.values.last().unwrap());
                worst = worst.max(eig_y.values[0] - 1.0);
                let mut slack = partial_transpose(y, (2, 2), Subsystem::A)
                    .expect("4 = 2×2")
                    .scale(-1.0);
                for x in 0..N_INPUTS {
                    for yy in 0..N_INPUTS {
                        let coeff = self.beta_at(a, b, x, yy);
                        if coeff != 0.0 {
                            slack = slack.add(&pairs[pair_index(x, yy)].scale(coeff));
                        }
                    }
                }
                worst = worst.max(-slack.min_eigenvalue());
            }
        }
        worst
    }

    /// Serialize to the documented JSON schema; floats round-trip exactly.
    pub fn to_json(&self) -> String {
        let mut beta = Vec::with_capacity(N_CELLS);
        for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                for x in 0..N_INPUTS {
                    for y in 0..N_INPUTS {
                        beta.push(BetaCell {
                            x: x as u8,
                            y: y as u8,
                            a: BellState::from_index(a).unwrap(),
                            b: BellState::from_index(b).unwrap(),
                            value: self.beta_at(a, b, x, y),
                        });
                    }
                }
            }
        }
        let dual_y = self
            .dual_y
            .iter()
            .map(|m| {
                (0..4)
                    .map(|i| {
                        (0..4)
                            .map(|j| {
                                let z = m.get(i, j);
                                [z.re, z.im]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let file = CoefficientsFile {
            input_set_id: self.input_set_id.clone(),
            provenance: self.provenance.clone(),
            beta,
            dual_y,
        };
        serde_json::to_string_pretty(&file).expect("coefficients serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, WitnessError> {
        let file: CoefficientsFile = serde_json::from_str(text)
            .map_err(|e| WitnessError::Scenario(ScenarioError::Format(e.to_string())))?;
        let mut beta = vec![0.0; N_CELLS];
        let mut seen = vec![false; N_CELLS];
        for cell in &file.beta {
            if cell.x as usize >= N_INPUTS || cell.y as usize >= N_INPUTS {
                return Err(WitnessError::Scenario(ScenarioError::Format(format!(
                    "coefficient input indices ({}, {}) out of range",
                    cell.x, cell.y
                ))));
            }
            let idx = cell_index(cell.a.index(), cell.b.index(), cell.x as usize, cell.y as usize);
            if seen[idx] {
                return Err(WitnessError::Scenario(ScenarioError::Format(
                    "duplicate coefficient cell".into(),
                )));
            }
            seen[idx] = true;
            beta[idx] = cell.value;
        }
        if file.dual_y.len() != 16 {
            return Err(WitnessError::Scenario(ScenarioError::Format(
                "expected 16 dual matrices".into(),
            )));
        }
        let mut dual_y = Vec::with_capacity(16);
        for m in &file.dual_y {
            if m.len() != 4 || m.iter().any(|row| row.len() != 4) {
                return Err(WitnessError::Scenario(ScenarioError::Format(
                    "dual matrices must be 4×4".into(),
                )));
            }
            let mut entries = Vec::with_capacity(16);
            for row in m {
                for z in row {
                    entries.push(C64::new(z[0], z[1]));
                }
            }
            dual_y.push(HermitianMatrix::new(4, entries)?);
        }
        Self::new(beta, file.input_set_id, dual_y, file.provenance)
    }
}

/// Extract witness coefficients from the dual solution of the witness
/// programs on a feasible (typically regularized) table.
pub fn extract_coefficients(
    t: &CorrelationTable,
    inputs: &InputStateSet,
) -> Result<WitnessCoefficients, WitnessError> {
    extract_coefficients_with(
        t,
        inputs,
        &witness_solver_params(),
        format!("extracted from table over {}", inputs.id()),
    )
}

pub fn extract_coefficients_with(
    t: &CorrelationTable,
    inputs: &InputStateSet,
    params: &SolverParams,
    provenance: String,
) -> Result<WitnessCoefficients, WitnessError> {
    let solve = solve_witness_programs(t, inputs, params)?;
    if solve.status == SolveStatus::MaxIterations {
        return Err(WitnessError::SolverFailure(
            "iteration budget exhausted while extracting coefficients".into(),
        ));
    }
    let basis = hermitian_basis(4);
    let mut beta = vec![0.0; N_CELLS];
    let mut dual_y = Vec::with_capacity(16);
    for a in 0..N_OUTCOMES {
        for b in 0..N_OUTCOMES {
            let sol = &solve.solutions[a * N_OUTCOMES + b];
            // Multipliers of the coupling rows assemble the dual matrix
            // Z = Σ y_r E_r with −I ⪯ Z ⪯ 0; store Y = −Z ∈ [0, I].
            let mut z = HermitianMatrix::zeros(4);
            for r in 0..COUPLING_ROWS {
                let y = sol.dual_multipliers[r];
                if y != 0.0 {
                    z = z.add(&basis[r].scale(y));
                }
            }
            dual_y.push(z.scale(-1.0));
            // Multipliers of the table rows are γ; β = −γ flips the sign
            // convention so negative evaluations certify entanglement.
            for x in 0..N_INPUTS {
                for y in 0..N_INPUTS {
                    let gamma = sol.dual_multipliers[COUPLING_ROWS + pair_index(x, y)];
                    beta[cell_index(a, b, x, y)] = -gamma;
                }
            }
        }
    }
    let coeffs = WitnessCoefficients::new(beta, inputs.id().to_string(), dual_y, provenance)?;
    let violation = coeffs.dual_feasibility_violation(inputs);
    if violation > 1e-7 {
        return Err(WitnessError::SolverFailure(format!(
            "extracted coefficients violate dual feasibility by {violation:.3e}"
        )));
    }
    Ok(coeffs)
}

/// Plain linear functional `Σ β·P`; no optimization involved. Requires the
/// table to be bound to the same input set as the coefficients.
pub fn evaluate_witness(
    coeffs: &WitnessCoefficients,
    t: &CorrelationTable,
) -> Result<f64, WitnessError> {
    if coeffs.input_set_id != t.input_set_id() {
        return Err(WitnessError::InputSetMismatch {
            expected: coeffs.input_set_id.clone(),
            found: t.input_set_id().to_string(),
        });
    }
    Ok(coeffs
        .beta
        .iter()
        .zip(t.probs())
        .map(|(b, p)| b * p)
        .sum())
}

/// Euclidean projection of a table onto the set of tables representable as
/// `tr(Π_ab (τ_x ⊗ τ_y))` with `Π_ab ⪰ 0`.
///
/// Feasible tables pass through unchanged (the projection is gated by an
/// exact linear-solve feasibility check, so idempotence is exact). For
/// infeasible tables each outcome pair is projected independently through an
/// epigraph program: minimize the top-corner entry s of a PSD-pinned block
/// `[[I, u], [uᵀ, s]]` whose off-diagonal u carries the residual coordinates
/// of the table against an orthonormal basis of the representable span.
pub fn regularize(
    t_raw: &CorrelationTable,
    inputs: &InputStateSet,
) -> Result<CorrelationTable, WitnessError> {
    regularize_with_params(t_raw, inputs, &witness_solver_params())
}

pub fn regularize_with_params(
    t_raw: &CorrelationTable,
    inputs: &InputStateSet,
    params: &SolverParams,
) -> Result<CorrelationTable, WitnessError> {
    check_table_inputs(t_raw, inputs)?;
    let pairs = input_pair_tensors(inputs);
    let basis = hermitian_basis(4);

    // Coordinates of every input-pair functional in the Hermitian basis:
    // phi[xy][r] = tr(E_r (τ_x ⊗ τ_y)).
    let phi: Vec<Vec<f64>> = (0..N_PAIRS)
        .map(|xy| basis.iter().map(|e| e.trace_product(&pairs[xy])).collect())
        .collect();

    // Orthonormal basis of the representable span inside R^36 (columns of
    // the 36×16 functional matrix, Gram–Schmidt twice for stability).
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    for r in 0..16 {
        let mut col: Vec<f64> = (0..N_PAIRS).map(|xy| phi[xy][r]).collect();
        for _pass in 0..2 {
            for q in &q_cols {
                let d: f64 = col.iter().zip(q).map(|(a, b)| a * b).sum();
                for (c, qe) in col.iter_mut().zip(q) {
                    *c -= d * qe;
                }
            }
        }
        let norm: f64 = col.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for c in &mut col {
                *c /= norm;
            }
            q_cols.push(col);
        }
    }
    let rank = q_cols.len();

    // Residual-space matrices M_r = Σ_xy Q[xy][r] (τ_x ⊗ τ_y).
    let m_mats: Vec<HermitianMatrix> = q_cols
        .iter()
        .map(|q| {
            let mut acc = HermitianMatrix::zeros(4);
            for (xy, w) in q.iter().enumerate() {
                if *w != 0.0 {
                    acc = acc.add(&pairs[xy].scale(*w));
                }
            }
            acc
        })
        .collect();

    // Feasibility gate: solve the rank×rank system Qᵀ Ψ h = Qᵀ p for the
    // coordinates of the unique Hermitian candidate and accept the table
    // unchanged when it reproduces every entry and the candidate is PSD.
    let feasible = {
        let mut ok = true;
        'outer: for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                let p: Vec<f64> = (0..N_PAIRS)
                    .map(|xy| t_raw.get_idx(a, b, xy / N_INPUTS, xy % N_INPUTS))
                    .collect();
                match solve_candidate(&phi, &q_cols, &m_mats, &basis, &p, rank) {
                    Some(pi) => {
                        for (xy, pair) in pairs.iter().enumerate() {
                            if (pi.trace_product(pair) - p[xy]).abs()
                                > params.consistency_tol * (1.0 + p[xy].abs())
                            {
                                ok = false;
                                break 'outer;
                            }
                        }
                        if pi.min_eigenvalue() < -params.eps_psd {
                            ok = false;
                            break 'outer;
                        }
                    }
                    None => {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        ok
    };
    if feasible {
        return Ok(t_raw.clone());
    }

    // Symmetric-basis elements for pinning the epigraph block.
    let epi_dim = rank + 1;
    let mut probs = vec![0.0; N_CELLS];
    for a in 0..N_OUTCOMES {
        for b in 0..N_OUTCOMES {
            let p: Vec<f64> = (0..N_PAIRS)
                .map(|xy| t_raw.get_idx(a, b, xy / N_INPUTS, xy % N_INPUTS))
                .collect();
            let p_coords: Vec<f64> = q_cols
                .iter()
                .map(|q| q.iter().zip(&p).map(|(a, b)| a * b).sum())
                .collect();

            let mut constraints = Vec::new();
            for i in 0..rank {
                for j in i..rank {
                    constraints.push(Constraint {
                        terms: vec![(1, sym_unit(epi_dim, i, j))],
                        rhs: if i == j { 1.0 } else { 0.0 },
                    });
                }
            }
            let sqrt2 = std::f64::consts::SQRT_2;
            for (r, m_r) in m_mats.iter().enumerate() {
                constraints.push(Constraint {
                    terms: vec![
                        (1, sym_unit(epi_dim, r, rank)),
                        (0, m_r.scale(-sqrt2)),
                    ],
                    rhs: -sqrt2 * p_coords[r],
                });
            }
            let mut objective_epi = HermitianMatrix::zeros(epi_dim);
            objective_epi = objective_epi.add(&HermitianMatrix::from_fn(epi_dim, |i, j| {
                if i == rank && j == rank {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            let problem = SdpProblem {
                name: format!("regularize_a{a}_b{b}"),
                blocks: vec![
                    BlockSpec::hermitian("pi", 4),
                    BlockSpec::real("epigraph", epi_dim),
                ],
                objective: vec![HermitianMatrix::zeros(4), objective_epi],
                constraints,
            };
            let sol = solve(&problem, params)?;
            if sol.status != SolveStatus::Optimal {
                return Err(WitnessError::SolverFailure(format!(
                    "projection for outcome pair ({a}, {b}) ended with {:?}",
                    sol.status
                )));
            }
            // Lift the projected operator slightly into the PSD interior so
            // the rebuilt table admits a strictly feasible model; the shift
            // is far below counting noise.
            let pi = sol.primal_blocks[0]
                .add(&HermitianMatrix::scaled_identity(4, PSD_LIFT));
            for (xy, pair) in pairs.iter().enumerate() {
                probs[cell_index(a, b, xy / N_INPUTS, xy % N_INPUTS)] =
                    pi.trace_product(pair);
            }
        }
    }

    let p_empty = if t_raw.includes_nondetect() {
        let mut empty = vec![0.0; N_PAIRS];
        for x in 0..N_INPUTS {
            for y in 0..N_INPUTS {
                let mut row = 0.0;
                for a in 0..N_OUTCOMES {
                    for b in 0..N_OUTCOMES {
                        row += probs[cell_index(a, b, x, y)];
                    }
                }
                empty[pair_index(x, y)] = 1.0 - row;
            }
        }
        Some(empty)
    } else {
        None
    };
    Ok(CorrelationTable::new(
        t_raw.input_set_id().to_string(),
        probs,
        t_raw.includes_nondetect(),
        p_empty,
    )?)
}

/// Unit element of the real symmetric basis, normalized so that
/// tr(E·B) = B_ii (diagonal) or √2·B_ij (off-diagonal).
fn sym_unit(dim: usize, i: usize, j: usize) -> HermitianMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    HermitianMatrix::from_fn(dim, |a, b| {
        if i == j {
            if (a, b) == (i, i) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        } else if (a, b) == (i, j) || (a, b) == (j, i) {
            C64::new(r, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Least-squares candidate Π for one outcome pair from the orthonormal span
/// coordinates; `None` when the reduced system is singular (it never is for
/// a tomographically complete input set).
fn solve_candidate(
    phi: &[Vec<f64>],
    q_cols: &[Vec<f64>],
    _m_mats: &[HermitianMatrix],
    basis: &[HermitianMatrix],
    p: &[f64],
    rank: usize,
) -> Option<HermitianMatrix> {
    // a[r][s] = Σ_xy Q[xy][r]·phi[xy][s] (rank×16), rhs_r = Σ_xy Q[xy][r]·p.
    let mut a = vec![vec![0.0; 16]; rank];
    let mut rhs = vec![0.0; rank];
    for (r, q) in q_cols.iter().enumerate() {
        for xy in 0..N_PAIRS {
            for s in 0..16 {
                a[r][s] += q[xy] * phi[xy][s];
            }
            rhs[r] += q[xy] * p[xy];
        }
    }
    // Gaussian elimination with partial pivoting on the square part; for a
    // complete input set rank = 16 and the system is square.
    if rank != 16 {
        return None;
    }
    let n = 16;
    let mut aug = a;
    for (row, r) in aug.iter_mut().zip(&rhs) {
        row.push(*r);
    }
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if aug[row][col].abs() > aug[piv][col].abs() {
                piv = row;
            }
        }
        if aug[piv][col].abs() < 1e-12 {
            return None;
        }
        aug.swap(col, piv);
        let inv = 1.0 / aug[col][col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = aug[row][col] * inv;
            if f != 0.0 {
                for k in col..=n {
                    aug[row][k] -= f * aug[col][k];
                }
            }
        }
    }
    let mut h = vec![0.0; n];
    for i in 0..n {
        h[i] = aug[i][n] / aug[i][i];
    }
    let mut pi = HermitianMatrix::zeros(4);
    for (c, e) in h.iter().zip(basis) {
        if *c != 0.0 {
            pi = pi.add(&e.scale(*c));
        }
    }
    Some(pi)
}

/// Full protocol on a count table: reconstruct probabilities, regularize a
/// copy for coefficient extraction only, and evaluate the witness on the
/// raw reconstruction. With supplied coefficients the regularization and
/// extraction steps are skipped entirely.
pub fn witness_pipeline(
    c: &CountTable,
    inputs: &InputStateSet,
    coeffs: Option<&WitnessCoefficients>,
) -> Result<(f64, WitnessCoefficients), WitnessError> {
    witness_pipeline_with_params(c, inputs, coeffs, &witness_solver_params())
}

pub fn witness_pipeline_with_params(
    c: &CountTable,
    inputs: &InputStateSet,
    coeffs: Option<&WitnessCoefficients>,
    params: &SolverParams,
) -> Result<(f64, WitnessCoefficients), WitnessError> {
    if c.input_set_id() != inputs.id() {
        return Err(WitnessError::InputSetMismatch {
            expected: inputs.id().to_string(),
            found: c.input_set_id(),
        });
    }
    let p_raw = reconstruct_probabilities(c)?;
    match coeffs {
        Some(co) => {
            let value = evaluate_witness(co, &p_raw)?;
            Ok((value, co.clone()))
        }
        None => {
            let p_bar = regularize_with_params(&p_raw, inputs, params)?;
            let co = extract_coefficients_with(
                &p_bar,
                inputs,
                params,
                format!("pipeline extraction; metadata {}", c.metadata),
            )?;
            let value = evaluate_witness(&co, &p_raw)?;
            Ok((value, co))
        }
    }
}

/// Parametric bootstrap: resample every cell as Poisson(N), reconstruct and
/// re-evaluate with fixed coefficients; returns the sample mean and standard
/// deviation. Per-sample RNG streams derive from (seed, sample index), so
/// results are reproducible and samples could be evaluated concurrently.
pub fn monte_carlo_error(
    c: &CountTable,
    inputs: &InputStateSet,
    coeffs: &WitnessCoefficients,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64), WitnessError> {
    if n_samples < 2 {
        return Err(WitnessError::Domain(format!(
            "need at least 2 Monte-Carlo samples, got {n_samples}"
        )));
    }
    if c.input_set_id() != inputs.id() {
        return Err(WitnessError::InputSetMismatch {
            expected: inputs.id().to_string(),
            found: c.input_set_id(),
        });
    }
    let mut values = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let counts: Vec<u64> = c
            .counts()
            .iter()
            .map(|&n| {
                if n == 0 {
                    0
                } else {
                    Poisson::new(n as f64).expect("positive mean").sample(&mut rng) as u64
                }
            })
            .collect();
        let resampled = CountTable::new(
            c.inputs.clone(),
            c.integration_time_s,
            serde_json::Value::Null,
            counts,
        )?;
        let table = reconstruct_probabilities(&resampled)?;
        values.push(evaluate_witness(coeffs, &table)?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlin::werner_state;
    use crate::scenario::{ideal_correlations, simulate_counts, MeasurementModel};

    fn standard() -> InputStateSet {
        InputStateSet::standard()
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let basis = hermitian_basis(4);
        assert_eq!(basis.len(), 16);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let ip = a.trace_product(b);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-12, "⟨E{i}, E{j}⟩ = {ip}");
            }
        }
    }

    #[test]
    fn separable_table_witnesses_to_zero() {
        let inputs = standard();
        let t = ideal_correlations(
            &crate::qlin::DensityOperator::maximally_mixed(4),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let w = compute_w_prime(&t, &inputs).unwrap();
        assert_eq!(w.status, SolveStatus::Optimal);
        assert!(w.w_prime <= 0.0, "w' = {}", w.w_prime);
        assert!(w.w_prime >= -1e-6, "w' = {}", w.w_prime);
        for tr in &w.sigma_minus_traces {
            assert!(*tr >= 0.0 && *tr < 1e-6);
        }
    }

    #[test]
    fn maximally_entangled_witness_value() {
        // Ideal table of the pure Bell-type state: each joint operator is a
        // quarter-weight maximally entangled projector, so every σ⁻ carries
        // trace 1/8 and W′ = −2.
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(1.0).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let w = compute_w_prime(&t, &inputs).unwrap();
        assert_eq!(w.status, SolveStatus::Optimal);
        assert!((w.w_prime + 2.0).abs() < 1e-6, "w' = {}", w.w_prime);
        for tr in &w.sigma_minus_traces {
            assert!((tr - 0.125).abs() < 1e-7);
        }
        for pi in &w.joint_povm {
            assert!(pi.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn separability_boundary_witnesses_to_zero() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(1.0 / 3.0).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let w = compute_w_prime(&t, &inputs).unwrap();
        assert!(w.w_prime.abs() < 1e-6, "w' = {}", w.w_prime);
    }

    #[test]
    fn extraction_agrees_with_primal_and_is_dual_feasible() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.8).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let w = compute_w_prime(&t, &inputs).unwrap();
        let coeffs = extract_coefficients(&t, &inputs).unwrap();
        assert!(coeffs.dual_feasibility_violation(&inputs) <= 1e-8);
        let value = evaluate_witness(&coeffs, &t).unwrap();
        // Strong duality at these sizes: the linear evaluation matches the
        // primal optimum.
        assert!((value - w.w_prime).abs() < 1e-6, "{} vs {}", value, w.w_prime);
        // Weak duality: the dual objective never exceeds the primal.
        assert!(-value <= -w.w_prime + 1e-7);
    }

    #[test]
    fn zero_coefficients_evaluate_to_zero() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.5).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let coeffs = WitnessCoefficients::new(
            vec![0.0; N_CELLS],
            inputs.id().to_string(),
            (0..16).map(|_| HermitianMatrix::zeros(4)).collect(),
            "null witness".into(),
        )
        .unwrap();
        assert_eq!(evaluate_witness(&coeffs, &t).unwrap(), 0.0);
    }

    #[test]
    fn evaluation_rejects_other_input_sets() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.5).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let coeffs = WitnessCoefficients::new(
            vec![0.0; N_CELLS],
            "inputs:other".into(),
            (0..16).map(|_| HermitianMatrix::zeros(4)).collect(),
            "foreign witness".into(),
        )
        .unwrap();
        assert!(matches!(
            evaluate_witness(&coeffs, &t),
            Err(WitnessError::InputSetMismatch { .. })
        ));
    }

    #[test]
    fn coefficients_json_round_trip_is_exact() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.94).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let coeffs = extract_coefficients(&t, &inputs).unwrap();
        let json = coeffs.to_json();
        let back = WitnessCoefficients::from_json(&json).unwrap();
        assert_eq!(coeffs.beta(), back.beta());
        assert_eq!(coeffs.input_set_id(), back.input_set_id());
        for (a, b) in coeffs.dual_y().iter().zip(back.dual_y()) {
            assert!(a.max_abs_diff(b) == 0.0);
        }
    }

    #[test]
    fn regularize_is_idempotent_on_feasible_tables() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.7).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let reg = regularize(&t, &inputs).unwrap();
        let dist: f64 = t
            .probs()
            .iter()
            .zip(reg.probs())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist <= 1e-7, "distance {dist}");
    }

    #[test]
    fn pipeline_is_deterministic() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.9).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let scaled = crate::scenario::apply_efficiency(&t, 0.03).unwrap();
        let counts = simulate_counts(&scaled, 85333.0, 10.0, 11).unwrap();
        let (v1, c1) = witness_pipeline(&counts, &inputs, None).unwrap();
        let (v2, c2) = witness_pipeline(&counts, &inputs, None).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(c1.beta(), c2.beta());
    }

    #[test]
    fn monte_carlo_contract() {
        let inputs = standard();
        let t = ideal_correlations(
            &werner_state(0.9).unwrap(),
            &inputs,
            &MeasurementModel::ideal(),
        )
        .unwrap();
        let counts = simulate_counts(&t, 2560.0, 10.0, 5).unwrap();
        let (_, coeffs) = witness_pipeline(&counts, &inputs, None).unwrap();
        assert!(monte_carlo_error(&counts, &inputs, &coeffs, 1, 3).is_err());
        let (m1, s1) = monte_carlo_error(&counts, &inputs, &coeffs, 64, 3).unwrap();
        let (m2, s2) = monte_carlo_error(&counts, &inputs, &coeffs, 64, 3).unwrap();
        assert_eq!((m1, s1), (m2, s2));
        assert!(s1 > 0.0);

        let zero = CountTable::new(
            c_labels(),
            10.0,
            serde_json::Value::Null,
            vec![0; N_CELLS],
        )
        .unwrap();
        assert!(monte_carlo_error(&zero, &inputs, &coeffs, 16, 3).is_err());
    }

    fn c_labels() -> Vec<String> {
        InputStateSet::standard().labels().to_vec()
    }
}
