//! The measurement scenario: trusted input states, Bell-state measurements
//! with a two-parameter imperfection model, correlation tables with an
//! optional non-detection outcome, Poissonian count simulation, and
//! count-to-probability reconstruction.
//!
//! Basis conventions, fixed once for the whole crate:
//! - within each side's joint measurement space the polarization qubit comes
//!   first and the path qubit second (this is the basis the Bell kets in
//!   [`BellState`] are written in);
//! - the global four-qubit order is (input-x path, A polarization,
//!   B polarization, input-y path), so Alice's measurement acts on the first
//!   two factors (reordered internally) and Bob's on the last two.
//! Any consistent choice yields the same probabilities; tests pin this one.

use crate::qlin::{
    tensor, BellState, DensityOperator, HermitianMatrix, PureKet, QlinError, C64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inputs per side.
pub const N_INPUTS: usize = 6;
/// Bell outcomes per side.
pub const N_OUTCOMES: usize = 4;
/// Input pairs (x, y).
pub const N_PAIRS: usize = N_INPUTS * N_INPUTS;
/// Table cells (a, b, x, y).
pub const N_CELLS: usize = N_OUTCOMES * N_OUTCOMES * N_PAIRS;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed table: {0}")]
    Format(String),
    #[error(transparent)]
    Qlin(#[from] QlinError),
}

/// Flat index into a 576-cell table, fixed iteration order (a, b, x, y).
#[inline]
pub fn cell_index(a: usize, b: usize, x: usize, y: usize) -> usize {
    ((a * N_OUTCOMES + b) * N_INPUTS + x) * N_INPUTS + y
}

#[inline]
pub fn pair_index(x: usize, y: usize) -> usize {
    x * N_INPUTS + y
}

/// Identifier binding tables and witness coefficients to an input-state set.
/// Labels act as the identity proxy, so distinct physical sets must use
/// distinct labels.
pub fn input_set_id(labels: &[String]) -> String {
    format!("inputs:{}", labels.join(","))
}

/// Ordered set of six trusted single-qubit input states.
#[derive(Debug, Clone)]
pub struct InputStateSet {
    id: String,
    labels: Vec<String>,
    states: Vec<DensityOperator>,
}

impl InputStateSet {
    pub fn new(labels: Vec<String>, states: Vec<DensityOperator>) -> Result<Self, ScenarioError> {
        if labels.len() != N_INPUTS || states.len() != N_INPUTS {
            return Err(ScenarioError::Dimension(format!(
                "input set needs exactly {N_INPUTS} labelled states"
            )));
        }
        for s in &states {
            if s.dim() != 2 {
                return Err(ScenarioError::Dimension("input states must be qubits".into()));
            }
        }
        for i in 0..labels.len() {
            for j in (i + 1)..labels.len() {
                if labels[i] == labels[j] {
                    return Err(ScenarioError::Format(format!(
                        "duplicate input label {:?}",
                        labels[i]
                    )));
                }
            }
        }
        let id = input_set_id(&labels);
        Ok(Self { id, labels, states })
    }

    /// The six Pauli eigenstates in the fixed order [+, −, +i, −i, 0, 1],
    /// each as a rank-1 projector.
    pub fn standard() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let kets = [
            vec![C64::new(r, 0.0), C64::new(r, 0.0)],
            vec![C64::new(r, 0.0), C64::new(-r, 0.0)],
            vec![C64::new(r, 0.0), C64::new(0.0, r)],
            vec![C64::new(r, 0.0), C64::new(0.0, -r)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        ];
        let labels = ["+", "-", "+i", "-i", "0", "1"];
        let states = kets
            .into_iter()
            .map(|amps| DensityOperator::from_pure(&PureKet::new(amps).expect("unit kets")))
            .collect();
        Self::new(labels.iter().map(|s| s.to_string()).collect(), states)
            .expect("standard set is valid")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn state(&self, x: usize) -> &DensityOperator {
        &self.states[x]
    }

    /// Whether the states span the full space of 2×2 Hermitian matrices
    /// (rank of their Gram matrix is 4), which makes the joint measurement
    /// operators uniquely determined by a correlation table.
    pub fn is_tomographically_complete(&self) -> bool {
        let gram = HermitianMatrix::from_fn(N_INPUTS, |i, j| {
            C64::new(
                self.states[i].matrix().trace_product(self.states[j].matrix()),
                0.0,
            )
        });
        let eig = crate::qlin::eig_hermitian(&gram);
        eig.values.iter().filter(|&&v| v > 1e-9).count() == 4
    }
}

/// Bell-state measurement POVM with a path-phase error and an isotropic
/// visibility mixing.
///
/// With `phase_error = 0` and `visibility = 1` these are the four exact Bell
/// projectors. Otherwise each projector P is rotated by
/// `diag(1, e^{i·phase_error})` on the path qubit and mixed as
/// `visibility·P + (1−visibility)·I₄/4`. The four elements always sum to I₄.
pub fn bsm_povm(
    phase_error: f64,
    visibility: f64,
) -> Result<[HermitianMatrix; 4], ScenarioError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(ScenarioError::Domain(format!(
            "visibility {visibility} outside [0, 1]"
        )));
    }
    let phase = C64::new(0.0, phase_error).exp();
    // I₂ ⊗ diag(1, e^{iδ}) on (polarization, path).
    let u = crate::qlin::ComplexMatrix::from_fn(4, |r, c| {
        if r != c {
            C64::new(0.0, 0.0)
        } else if r % 2 == 1 {
            phase
        } else {
            C64::new(1.0, 0.0)
        }
    });
    let mixed = HermitianMatrix::scaled_identity(4, 0.25);
    let mut out = Vec::with_capacity(4);
    for bell in BellState::ALL {
        let rotated = bell.ket().projector().conjugate_by(&u);
        out.push(rotated.scale(visibility).add(&mixed.scale(1.0 - visibility)));
    }
    Ok(out.try_into().expect("four outcomes"))
}

/// Both sides' measurement POVMs plus the imperfection knobs they were
/// built from. Elements are stored in each side's local
/// (polarization ⊗ path) basis.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    povm_a: Vec<HermitianMatrix>,
    povm_b: Vec<HermitianMatrix>,
    pub phase_error_a: f64,
    pub phase_error_b: f64,
    pub visibility: f64,
}

impl MeasurementModel {
    pub fn new(
        phase_error_a: f64,
        phase_error_b: f64,
        visibility: f64,
    ) -> Result<Self, ScenarioError> {
        let povm_a = bsm_povm(phase_error_a, visibility)?;
        let povm_b = bsm_povm(phase_error_b, visibility)?;
        let model = Self {
            povm_a: povm_a.to_vec(),
            povm_b: povm_b.to_vec(),
            phase_error_a,
            phase_error_b,
            visibility,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn ideal() -> Self {
        Self::new(0.0, 0.0, 1.0).expect("ideal model is valid")
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        for povm in [&self.povm_a, &self.povm_b] {
            let mut sum = HermitianMatrix::zeros(4);
            for e in povm {
                if e.min_eigenvalue() < -1e-10 {
                    return Err(ScenarioError::Domain(
                        "measurement element is not PSD".into(),
                    ));
                }
                sum = sum.add(e);
            }
            if !sum.approx_eq(&HermitianMatrix::identity(4), 1e-10) {
                return Err(ScenarioError::Domain(
                    "measurement elements do not sum to identity".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn povm_a(&self) -> &[HermitianMatrix] {
        &self.povm_a
    }

    pub fn povm_b(&self) -> &[HermitianMatrix] {
        &self.povm_b
    }
}

/// Probabilities P(a,b | x,y), possibly sub-normalized, with an optional
/// explicit non-detection column per input pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    input_set_id: String,
    probs: Vec<f64>,
    includes_nondetect: bool,
    p_empty: Option<Vec<f64>>,
}

impl CorrelationTable {
    pub fn new(
        input_set_id: String,
        mut probs: Vec<f64>,
        includes_nondetect: bool,
        p_empty: Option<Vec<f64>>,
    ) -> Result<Self, ScenarioError> {
        if probs.len() != N_CELLS {
            return Err(ScenarioError::Dimension(format!(
                "expected {N_CELLS} probabilities, got {}",
                probs.len()
            )));
        }
        for p in &mut probs {
            if *p < -1e-12 {
                return Err(ScenarioError::Domain(format!(
                    "probability {p} below rounding floor"
                )));
            }
            if *p > 1.0 + 1e-9 {
                return Err(ScenarioError::Domain(format!("probability {p} above 1")));
            }
            *p = p.clamp(0.0, 1.0);
        }
        if includes_nondetect {
            let empty = p_empty.as_ref().ok_or_else(|| {
                ScenarioError::Format("non-detection flag set without p_empty".into())
            })?;
            if empty.len() != N_PAIRS {
                return Err(ScenarioError::Dimension(format!(
                    "expected {N_PAIRS} non-detection entries, got {}",
                    empty.len()
                )));
            }
            for x in 0..N_INPUTS {
                for y in 0..N_INPUTS {
                    let mut total = empty[pair_index(x, y)];
                    for a in 0..N_OUTCOMES {
                        for b in 0..N_OUTCOMES {
                            total += probs[cell_index(a, b, x, y)];
                        }
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(ScenarioError::Domain(format!(
                            "inputs ({x},{y}): outcomes plus non-detection sum to {total}"
                        )));
                    }
                }
            }
        } else {
            for x in 0..N_INPUTS {
                for y in 0..N_INPUTS {
                    let mut total = 0.0;
                    for a in 0..N_OUTCOMES {
                        for b in 0..N_OUTCOMES {
                            total += probs[cell_index(a, b, x, y)];
                        }
                    }
                    if total > 1.0 + 1e-9 {
                        return Err(ScenarioError::Domain(format!(
                            "inputs ({x},{y}): outcomes sum to {total} > 1"
                        )));
                    }
                }
            }
        }
        Ok(Self { input_set_id, probs, includes_nondetect, p_empty })
    }

    pub fn from_fn(
        input_set_id: String,
        includes_nondetect: bool,
        p_empty: Option<Vec<f64>>,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self, ScenarioError> {
        let mut probs = vec![0.0; N_CELLS];
        for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                for x in 0..N_INPUTS {
                    for y in 0..N_INPUTS {
                        probs[cell_index(a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Self::new(input_set_id, probs, includes_nondetect, p_empty)
    }

    pub fn input_set_id(&self) -> &str {
        &self.input_set_id
    }

    pub fn includes_nondetect(&self) -> bool {
        self.includes_nondetect
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p_empty(&self) -> Option<&[f64]> {
        self.p_empty.as_deref()
    }

    #[inline]
    pub fn get_idx(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[cell_index(a, b, x, y)]
    }

    pub fn get(&self, a: BellState, b: BellState, x: usize, y: usize) -> f64 {
        self.get_idx(a.index(), b.index(), x, y)
    }

    pub fn row_sum(&self, x: usize, y: usize) -> f64 {
        let mut total = 0.0;
        for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                total += self.get_idx(a, b, x, y);
            }
        }
        total
    }
}

/// Reorder a 4×4 operator from (polarization, path) to (path, polarization).
fn swap_factors(m: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::from_fn(4, |r, c| {
        let (k, i) = (r / 2, r % 2);
        let (k2, i2) = (c / 2, c % 2);
        m.get(i * 2 + k, i2 * 2 + k2)
    })
}

/// The sixteen joint measurement operators Π_ab acting on the two input
/// qubits, obtained by tracing the shared state against both measurement
/// elements. Index order is `a·4 + b`.
pub fn effective_joint_povm(
    rho: &DensityOperator,
    meas: &MeasurementModel,
) -> Result<Vec<HermitianMatrix>, ScenarioError> {
    if rho.dim() != 4 {
        return Err(ScenarioError::Dimension(format!(
            "shared state has dim {}, expected 4",
            rho.dim()
        )));
    }
    let mut out = Vec::with_capacity(16);
    for a in 0..N_OUTCOMES {
        let aa = swap_factors(&meas.povm_a[a]);
        for b in 0..N_OUTCOMES {
            let bb = &meas.povm_b[b];
            let pi = HermitianMatrix::from_fn(4, |rc, cc| {
                let (k, l) = (rc / 2, rc % 2);
                let (k2, l2) = (cc / 2, cc % 2);
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..2 {
                    for i2 in 0..2 {
                        for j in 0..2 {
                            for j2 in 0..2 {
                                acc += aa.get(k * 2 + i, k2 * 2 + i2)
                                    * rho.matrix().get(i2 * 2 + j2, i * 2 + j)
                                    * bb.get(j * 2 + l, j2 * 2 + l2);
                            }
                        }
                    }
                }
                acc
            });
            out.push(pi);
        }
    }
    Ok(out)
}

/// P(a,b | x,y) for a shared state probed with the input set through both
/// measurements.
pub fn ideal_correlations(
    rho: &DensityOperator,
    inputs: &InputStateSet,
    meas: &MeasurementModel,
) -> Result<CorrelationTable, ScenarioError> {
    let pis = effective_joint_povm(rho, meas)?;
    let pairs = input_pair_tensors(inputs);
    let mut probs = vec![0.0; N_CELLS];
    for a in 0..N_OUTCOMES {
        for b in 0..N_OUTCOMES {
            let pi = &pis[a * N_OUTCOMES + b];
            for x in 0..N_INPUTS {
                for y in 0..N_INPUTS {
                    probs[cell_index(a, b, x, y)] = pi.trace_product(&pairs[pair_index(x, y)]);
                }
            }
        }
    }
    CorrelationTable::new(inputs.id().to_string(), probs, false, None)
}

pub(crate) fn input_pair_tensors(inputs: &InputStateSet) -> Vec<HermitianMatrix> {
    let mut pairs = Vec::with_capacity(N_PAIRS);
    for x in 0..N_INPUTS {
        for y in 0..N_INPUTS {
            pairs.push(tensor(inputs.state(x).matrix(), inputs.state(y).matrix()));
        }
    }
    pairs
}

/// Correlations of an explicitly separable shared state
/// `Σ_k w_k ρᴬ_k ⊗ ρᴮ_k`: each side's trace factorizes, so the table is a
/// weighted sum of products of local response functions.
pub fn separable_correlations(
    components: &[(f64, DensityOperator, DensityOperator)],
    inputs: &InputStateSet,
    meas: &MeasurementModel,
) -> Result<CorrelationTable, ScenarioError> {
    if components.is_empty() {
        return Err(ScenarioError::Domain("no separable components given".into()));
    }
    let weight_sum: f64 = components.iter().map(|(w, _, _)| *w).sum();
    if components.iter().any(|(w, _, _)| *w < 0.0) || (weight_sum - 1.0).abs() > 1e-9 {
        return Err(ScenarioError::Domain(
            "component weights must be nonnegative and sum to 1".into(),
        ));
    }
    let mut probs = vec![0.0; N_CELLS];
    for (w, rho_a, rho_b) in components {
        if rho_a.dim() != 2 || rho_b.dim() != 2 {
            return Err(ScenarioError::Dimension("local states must be qubits".into()));
        }
        // tr[A_a (τ_x ⊗ ρᴬ)] and tr[B_b (ρᴮ ⊗ τ_y)]
        let mut resp_a = [[0.0; N_INPUTS]; N_OUTCOMES];
        let mut resp_b = [[0.0; N_INPUTS]; N_OUTCOMES];
        for a in 0..N_OUTCOMES {
            let aa = swap_factors(&meas.povm_a[a]);
            for x in 0..N_INPUTS {
                resp_a[a][x] = aa.trace_product(&tensor(inputs.state(x).matrix(), rho_a.matrix()));
            }
        }
        for b in 0..N_OUTCOMES {
            for y in 0..N_INPUTS {
                resp_b[b][y] = meas.povm_b[b]
                    .trace_product(&tensor(rho_b.matrix(), inputs.state(y).matrix()));
            }
        }
        for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                for x in 0..N_INPUTS {
                    for y in 0..N_INPUTS {
                        probs[cell_index(a, b, x, y)] += w * resp_a[a][x] * resp_b[b][y];
                    }
                }
            }
        }
    }
    CorrelationTable::new(inputs.id().to_string(), probs, false, None)
}

/// Scale all outcome probabilities by a detection efficiency η and account
/// for the lost weight in an explicit non-detection column.
pub fn apply_efficiency(
    t: &CorrelationTable,
    eta: f64,
) -> Result<CorrelationTable, ScenarioError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ScenarioError::Domain(format!(
            "efficiency {eta} outside (0, 1]"
        )));
    }
    if t.includes_nondetect {
        return Err(ScenarioError::Domain(
            "table already carries a non-detection outcome".into(),
        ));
    }
    let probs: Vec<f64> = t.probs.iter().map(|p| eta * p).collect();
    let mut p_empty = vec![0.0; N_PAIRS];
    for x in 0..N_INPUTS {
        for y in 0..N_INPUTS {
            let mut detected = 0.0;
            for a in 0..N_OUTCOMES {
                for b in 0..N_OUTCOMES {
                    detected += probs[cell_index(a, b, x, y)];
                }
            }
            p_empty[pair_index(x, y)] = 1.0 - detected;
        }
    }
    CorrelationTable::new(t.input_set_id.clone(), probs, true, Some(p_empty))
}

/// Integer event counts per (a, b, x, y) cell with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub inputs: Vec<String>,
    pub integration_time_s: f64,
    pub metadata: serde_json::Value,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct CountCell {
    x: u8,
    y: u8,
    a: BellState,
    b: BellState,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct CountTableFile {
    inputs: Vec<String>,
    integration_time_s: f64,
    metadata: serde_json::Value,
    counts: Vec<CountCell>,
}

impl CountTable {
    pub fn new(
        inputs: Vec<String>,
        integration_time_s: f64,
        metadata: serde_json::Value,
        counts: Vec<u64>,
    ) -> Result<Self, ScenarioError> {
        if inputs.len() != N_INPUTS {
            return Err(ScenarioError::Dimension(format!(
                "expected {N_INPUTS} input labels, got {}",
                inputs.len()
            )));
        }
        if counts.len() != N_CELLS {
            return Err(ScenarioError::Dimension(format!(
                "expected {N_CELLS} cells, got {}",
                counts.len()
            )));
        }
        Ok(Self { inputs, integration_time_s, metadata, counts })
    }

    #[inline]
    pub fn get_idx(&self, a: usize, b: usize, x: usize, y: usize) -> u64 {
        self.counts[cell_index(a, b, x, y)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn input_set_id(&self) -> String {
        input_set_id(&self.inputs)
    }

    /// Serialize to the documented JSON schema. All 576 cells are written in
    /// the fixed (a, b, x, y) order, so output is deterministic.
    pub fn to_json(&self) -> String {
        let mut cells = Vec::with_capacity(N_CELLS);
        for a in 0..N_OUTCOMES {
            for b in 0..N_OUTCOMES {
                for x in 0..N_INPUTS {
                    for y in 0..N_INPUTS {
                        cells.push(CountCell {
                            x: x as u8,
                            y: y as u8,
                            a: BellState::from_index(a).unwrap(),
                            b: BellState::from_index(b).unwrap(),
                            n: self.get_idx(a, b, x, y),
                        });
                    }
                }
            }
        }
        let file = CountTableFile {
            inputs: self.inputs.clone(),
            integration_time_s: self.integration_time_s,
            metadata: self.metadata.clone(),
            counts: cells,
        };
        serde_json::to_string_pretty(&file).expect("count table serializes")
    }

    /// Parse the documented JSON schema. Missing cells mean zero counts;
    /// duplicate (x, y, a, b) keys are an error.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: CountTableFile =
            serde_json::from_str(text).map_err(|e| ScenarioError::Format(e.to_string()))?;
        if file.inputs.len() != N_INPUTS {
            return Err(ScenarioError::Format(format!(
                "expected {N_INPUTS} input labels, got {}",
                file.inputs.len()
            )));
        }
        let mut counts = vec![0u64; N_CELLS];
        let mut seen = vec![false; N_CELLS];
        for cell in &file.counts {
            if cell.x as usize >= N_INPUTS || cell.y as usize >= N_INPUTS {
                return Err(ScenarioError::Format(format!(
                    "cell input indices ({}, {}) out of range",
                    cell.x, cell.y
                )));
            }
            let idx = cell_index(cell.a.index(), cell.b.index(), cell.x as usize, cell.y as usize);
            if seen[idx] {
                return Err(ScenarioError::Format(format!(
                    "duplicate cell (x={}, y={}, a={}, b={})",
                    cell.x,
                    cell.y,
                    cell.a.label(),
                    cell.b.label()
                )));
            }
            seen[idx] = true;
            counts[idx] = cell.n;
        }
        Self::new(file.inputs, file.integration_time_s, file.metadata, counts)
    }
}

/// Draw Poissonian counts `N(abxy) ~ Poisson(rate · time · P(ab|xy))`,
/// independently per cell, reproducibly for a fixed seed.
pub fn simulate_counts(
    t: &CorrelationTable,
    pair_rate_hz: f64,
    time_s: f64,
    seed: u64,
) -> Result<CountTable, ScenarioError> {
    simulate_counts_with_background(t, pair_rate_hz, time_s, 0.0, seed)
}

/// [`simulate_counts`] plus a uniform background rate added to every cell;
/// dark counts fold into this single knob.
pub fn simulate_counts_with_background(
    t: &CorrelationTable,
    pair_rate_hz: f64,
    time_s: f64,
    background_rate_hz: f64,
    seed: u64,
) -> Result<CountTable, ScenarioError> {
    if pair_rate_hz < 0.0 || time_s < 0.0 || background_rate_hz < 0.0 {
        return Err(ScenarioError::Domain(
            "rates and integration time must be nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; N_CELLS];
    for (idx, p) in t.probs.iter().enumerate() {
        let mean = pair_rate_hz * time_s * p + background_rate_hz * time_s;
        counts[idx] = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| ScenarioError::Domain(format!("invalid Poisson mean: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
    }
    let labels: Vec<String> = t
        .input_set_id
        .strip_prefix("inputs:")
        .map(|s| s.split(',').map(str::to_string).collect())
        .filter(|v: &Vec<String>| v.len() == N_INPUTS)
        .unwrap_or_else(|| (0..N_INPUTS).map(|i| format!("tau{i}")).collect());
    CountTable::new(
        labels,
        time_s,
        serde_json::json!({
            "seed": seed,
            "pair_rate_hz": pair_rate_hz,
            "background_rate_hz": background_rate_hz,
        }),
        counts,
    )
}

/// Reconstruct probabilities as `P = N(abxy)/N*` with
/// `N* = max_xy Σ_ab N(abxy)`; the maximizing input pair's outcomes sum to
/// one and every other row is sub-normalized.
pub fn reconstruct_probabilities(c: &CountTable) -> Result<CorrelationTable, ScenarioError> {
    let mut nstar = 0u64;
    for x in 0..N_INPUTS {
        for y in 0..N_INPUTS {
            let mut row = 0u64;
            for a in 0..N_OUTCOMES {
                for b in 0..N_OUTCOMES {
                    row += c.get_idx(a, b, x, y);
                }
            }
            nstar = nstar.max(row);
        }
    }
    if nstar == 0 {
        return Err(ScenarioError::Domain("count table is identically zero".into()));
    }
    let denom = nstar as f64;
    let probs: Vec<f64> = c.counts.iter().map(|&n| n as f64 / denom).collect();
    CorrelationTable::new(c.input_set_id(), probs, false, None)
}
