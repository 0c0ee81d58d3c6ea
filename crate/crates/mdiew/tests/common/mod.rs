//! Shared oracles for integration tests.
//!
//! The witness oracle here runs on pure linear algebra: for a
//! tomographically complete input set the joint operators are uniquely
//! determined by the table, so the witness value reduces to an
//! eigendecomposition of their partial transposes. It shares no code with
//! the interior-point path it checks.

use mdiew::qlin::{
    eig_hermitian, partial_transpose, tensor, DensityOperator, HermitianMatrix, PureKet,
    Subsystem, C64,
};
use mdiew::scenario::{CorrelationTable, InputStateSet, N_INPUTS, N_OUTCOMES, N_PAIRS};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Orthonormal Hermitian basis (test-local copy).
fn basis4() -> Vec<HermitianMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for i in 0..4 {
        out.push(HermitianMatrix::from_fn(4, |a, b| {
            if a == i && b == i {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            out.push(HermitianMatrix::from_fn(4, |a, b| {
                if (a, b) == (i, j) || (a, b) == (j, i) {
                    C64::new(r, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            out.push(HermitianMatrix::from_fn(4, |a, b| {
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
    out
}

/// Witness value by the linear-algebra route: solve the normal equations for
/// the unique joint operator of each outcome pair, then sum the negative
/// parts of the partial transposes. Only valid for exactly representable
/// tables (ideal simulations).
pub fn eig_route_w_prime(t: &CorrelationTable, inputs: &InputStateSet) -> f64 {
    let basis = basis4();
    let pairs: Vec<HermitianMatrix> = (0..N_PAIRS)
        .map(|xy| {
            tensor(
                inputs.state(xy / N_INPUTS).matrix(),
                inputs.state(xy % N_INPUTS).matrix(),
            )
        })
        .collect();
    // psi[xy][r] = tr(E_r (τ_x ⊗ τ_y))
    let psi: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| basis.iter().map(|e| e.trace_product(p)).collect())
        .collect();
    // Normal equations ΨᵀΨ h = Ψᵀ p, one solve per outcome pair.
    let mut gram = [[0.0f64; 16]; 16];
    for row in &psi {
        for r in 0..16 {
            for s in 0..16 {
                gram[r][s] += row[r] * row[s];
            }
        }
    }
    let mut w_prime = 0.0;
    for a in 0..N_OUTCOMES {
        for b in 0..N_OUTCOMES {
            let mut rhs = [0.0f64; 16];
            for (xy, row) in psi.iter().enumerate() {
                let p = t.get_idx(a, b, xy / N_INPUTS, xy % N_INPUTS);
                for r in 0..16 {
                    rhs[r] += row[r] * p;
                }
            }
            let h = solve16(gram, rhs);
            let mut pi = HermitianMatrix::zeros(4);
            for (c, e) in h.iter().zip(&basis) {
                pi = pi.add(&e.scale(*c));
            }
            let pt = partial_transpose(&pi, (2, 2), Subsystem::A).unwrap();
            let eig = eig_hermitian(&pt);
            w_prime += eig.values.iter().filter(|v| **v < 0.0).sum::<f64>();
        }
    }
    w_prime
}

fn solve16(a: [[f64; 16]; 16], b: [f64; 16]) -> [f64; 16] {
    let mut aug = [[0.0f64; 17]; 16];
    for i in 0..16 {
        aug[i][..16].copy_from_slice(&a[i]);
        aug[i][16] = b[i];
    }
    for col in 0..16 {
        let mut piv = col;
        for row in (col + 1)..16 {
            if aug[row][col].abs() > aug[piv][col].abs() {
                piv = row;
            }
        }
        aug.swap(col, piv);
        let inv = 1.0 / aug[col][col];
        for row in 0..16 {
            if row == col {
                continue;
            }
            let f = aug[row][col] * inv;
            for k in col..17 {
                aug[row][k] -= f * aug[col][k];
            }
        }
    }
    let mut x = [0.0f64; 16];
    for i in 0..16 {
        x[i] = aug[i][16] / aug[i][i];
    }
    x
}

/// Random mixed qubit state from a Ginibre square.
pub fn random_qubit(rng: &mut ChaCha8Rng) -> DensityOperator {
    let g: Vec<C64> = (0..4)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    // ρ = G G† / tr(G G†)
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                m[i][j] += g[i * 2 + k] * g[j * 2 + k].conj();
            }
        }
    }
    let tr = (m[0][0] + m[1][1]).re;
    let h = HermitianMatrix::from_fn(2, |i, j| m[i][j] / tr);
    DensityOperator::new(h).expect("normalized Ginibre square is a state")
}

/// Random pure qubit state.
pub fn random_pure_qubit(rng: &mut ChaCha8Rng) -> DensityOperator {
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let phi: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let ket = PureKet::new(vec![
        C64::new((theta / 2.0).cos(), 0.0),
        C64::new(0.0, phi).exp() * (theta / 2.0).sin(),
    ])
    .expect("unit ket");
    DensityOperator::from_pure(&ket)
}

/// Random product mixture with at most four components.
pub fn random_product_mixture(
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, DensityOperator, DensityOperator)> {
    let k = rng.gen_range(1..=4);
    let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    // Exact unit sum so the scenario-level weight check cannot trip on
    // rounding.
    let correction: f64 = 1.0 - weights.iter().sum::<f64>();
    weights[0] += correction;
    weights
        .into_iter()
        .map(|w| {
            let a = if rng.gen_bool(0.5) {
                random_qubit(rng)
            } else {
                random_pure_qubit(rng)
            };
            let b = if rng.gen_bool(0.5) {
                random_qubit(rng)
            } else {
                random_pure_qubit(rng)
            };
            (w, a, b)
        })
        .collect()
}
