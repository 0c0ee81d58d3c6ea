//! Homogeneous self-dual interior-point core.
//!
//! The embedding solves
//!   𝒜x − bτ = 0,  𝒜ᵀy + s − cτ = 0,  bᵀy − ⟨c,x⟩ − κ = 0,
//!   x, s ⪰ 0, τ, κ ≥ 0
//! by a Mehrotra-style predictor-corrector with Nesterov–Todd scaling.
//! τ → positive recovers an optimal pair; κ dominating τ with bᵀy > 0
//! yields a Farkas certificate of primal infeasibility.
//!
//! Equality rows are preprocessed by Gram–Schmidt: redundant rows are
//! dropped (their multipliers report as zero) and redundant rows whose
//! right-hand side disagrees with the kept span prove infeasibility outright.
//! That is exactly how an overdetermined probability table with no PSD model
//! surfaces.

use super::sym::{cholesky, cholesky_solve, sym_eig, RMat};
use super::{
    BlockKind, InfeasibilityCertificate, SdpError, SdpProblem, SdpSolution, SolveStatus,
    SolverParams,
};
use crate::qlin::{eig_hermitian, HermitianMatrix, C64};

const RANK_TOL: f64 = 1e-10;
const STEP_FRACTION: f64 = 0.98;

struct Internal {
    /// Realified dimension per block.
    dims: Vec<usize>,
    kinds: Vec<BlockKind>,
    c: Vec<RMat>,
    /// Kept constraint rows; terms sorted by block index.
    rows: Vec<Vec<(usize, RMat)>>,
    b: Vec<f64>,
    /// Original index of each kept row.
    kept: Vec<usize>,
    n_orig: usize,
}

/// Realified coefficient: `emb(A)/2` for Hermitian blocks so that
/// `⟨Ã, X̃⟩ = tr(A X)` holds without factor bookkeeping; real blocks pass
/// through unembedded.
fn lower(kind: BlockKind, h: &HermitianMatrix) -> RMat {
    let n = h.dim();
    match kind {
        BlockKind::Hermitian => {
            let mut m = RMat::zeros(2 * n);
            for i in 0..n {
                for j in 0..n {
                    let z = h.get(i, j);
                    m.set(i, j, 0.5 * z.re);
                    m.set(n + i, n + j, 0.5 * z.re);
                    m.set(i, n + j, -0.5 * z.im);
                    m.set(n + i, j, 0.5 * z.im);
                }
            }
            m
        }
        BlockKind::RealSymmetric => RMat::from_fn(n, |i, j| h.get(i, j).re),
    }
}

/// Recover the Hermitian block from an internal real iterate, averaging over
/// the embedding symmetry first.
fn raise(kind: BlockKind, x: &RMat) -> HermitianMatrix {
    match kind {
        BlockKind::Hermitian => {
            let n = x.dim / 2;
            HermitianMatrix::from_fn(n, |i, j| {
                let re = 0.5 * (x.get(i, j) + x.get(n + i, n + j));
                let im = 0.5 * (x.get(n + i, j) - x.get(i, n + j));
                C64::new(re, im)
            })
        }
        BlockKind::RealSymmetric => {
            HermitianMatrix::from_fn(x.dim, |i, j| C64::new(0.5 * (x.get(i, j) + x.get(j, i)), 0.0))
        }
    }
}

enum Preprocessed {
    Ok(Internal),
    Inconsistent { ray: Vec<f64> },
}

/// Gram–Schmidt over constraint rows with the right-hand side carried along.
/// A dependent row whose rhs residual exceeds the consistency tolerance
/// produces a Farkas ray over the original rows.
fn preprocess(problem: &SdpProblem, params: &SolverParams) -> Preprocessed {
    let dims: Vec<usize> = problem
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Hermitian => 2 * b.dim,
            BlockKind::RealSymmetric => b.dim,
        })
        .collect();
    let kinds: Vec<BlockKind> = problem.blocks.iter().map(|b| b.kind).collect();
    let offsets: Vec<usize> = {
        let mut off = vec![0usize];
        for d in &dims {
            off.push(off.last().unwrap() + d * d);
        }
        off
    };
    let total: usize = *offsets.last().unwrap();

    let densify = |terms: &[(usize, RMat)]| -> Vec<f64> {
        let mut v = vec![0.0; total];
        for (bi, m) in terms {
            v[offsets[*bi]..offsets[*bi] + m.data.len()].copy_from_slice(&m.data);
        }
        v
    };

    let mut kept: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<(usize, RMat)>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut bq: Vec<f64> = Vec::new();
    // q_j expressed over kept original rows, for certificate construction.
    let mut tq: Vec<Vec<f64>> = Vec::new();

    for (idx, con) in problem.constraints.iter().enumerate() {
        let mut terms: Vec<(usize, RMat)> = con
            .terms
            .iter()
            .map(|(bi, h)| (*bi, lower(kinds[*bi], h)))
            .collect();
        terms.sort_by_key(|(bi, _)| *bi);
        let mut v = densify(&terms);
        let orig_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut beta = con.rhs;
        let mut coeffs = vec![0.0; qs.len()];
        for _pass in 0..2 {
            for (j, q) in qs.iter().enumerate() {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                if d == 0.0 {
                    continue;
                }
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
                beta -= d * bq[j];
                coeffs[j] += d;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > RANK_TOL * orig_norm.max(1.0) {
            let inv = 1.0 / norm;
            qs.push(v.iter().map(|x| x * inv).collect());
            bq.push(beta * inv);
            let mut t = vec![0.0; kept.len() + 1];
            for (j, cj) in coeffs.iter().enumerate() {
                for (k, tk) in tq[j].iter().enumerate() {
                    t[k] -= cj * tk;
                }
            }
            t[kept.len()] = 1.0;
            for x in &mut t {
                *x *= inv;
            }
            tq.push(t);
            kept.push(idx);
            rows.push(terms);
            b.push(con.rhs);
        } else if beta.abs() > params.consistency_tol * (1.0 + con.rhs.abs()) {
            // The dropped row is a combination of kept rows with a different
            // rhs: y = (e_idx − Σ combo)/β is an improving ray.
            let mut w = vec![0.0; kept.len()];
            for (j, cj) in coeffs.iter().enumerate() {
                for (k, tk) in tq[j].iter().enumerate() {
                    w[k] += cj * tk;
                }
            }
            let mut ray = vec![0.0; problem.constraints.len()];
            ray[idx] = 1.0;
            for (k, orig) in kept.iter().enumerate() {
                ray[*orig] -= w[k];
            }
            for x in &mut ray {
                *x /= beta;
            }
            return Preprocessed::Inconsistent { ray };
        }
    }

    let c = problem
        .objective
        .iter()
        .zip(&kinds)
        .map(|(h, k)| lower(*k, h))
        .collect();
    Preprocessed::Ok(Internal {
        dims,
        kinds,
        c,
        rows,
        b,
        kept,
        n_orig: problem.constraints.len(),
    })
}

fn infeasible_solution(problem: &SdpProblem, ray: Vec<f64>) -> SdpSolution {
    // Slack of the ray, recomputed from the original Hermitian data.
    let mut max_eig = f64::NEG_INFINITY;
    for (i, spec) in problem.blocks.iter().enumerate() {
        let mut acc = HermitianMatrix::zeros(spec.dim);
        for (k, con) in problem.constraints.iter().enumerate() {
            if ray[k] == 0.0 {
                continue;
            }
            for (bi, a) in &con.terms {
                if *bi == i {
                    acc = acc.add(&a.scale(ray[k]));
                }
            }
        }
        let eig = eig_hermitian(&acc);
        max_eig = max_eig.max(eig.values[0]);
    }
    let gain: f64 = problem
        .constraints
        .iter()
        .zip(&ray)
        .map(|(c, y)| c.rhs * y)
        .sum();
    SdpSolution {
        status: SolveStatus::Infeasible,
        primal_blocks: problem
            .blocks
            .iter()
            .map(|b| HermitianMatrix::zeros(b.dim))
            .collect(),
        dual_multipliers: vec![0.0; problem.constraints.len()],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        gap: f64::NAN,
        iterations: 0,
        certificate: Some(InfeasibilityCertificate {
            multipliers: ray,
            objective_gain: gain,
            ray_slack_max_eig: max_eig,
        }),
    }
}

struct Scaling {
    g: RMat,
    ginv: RMat,
    /// Diagonal of the scaled point V (= both scaled X and scaled S).
    v: Vec<f64>,
}

/// NT scaling factor: W = S^{-1/2}(S^{1/2} X S^{1/2})^{1/2} S^{-1/2} = GGᵀ,
/// with G chosen so that both scaled variables equal diag(v).
fn nt_scaling(x: &RMat, s: &RMat) -> Option<Scaling> {
    let n = x.dim;
    let (ls, us) = sym_eig(s, true);
    let us = us.unwrap();
    if ls.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let mut shalf = RMat::zeros(n);
    let mut sinvhalf = RMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut a = 0.0;
            let mut bq = 0.0;
            for k in 0..n {
                let w = us.get(i, k) * us.get(j, k);
                a += w * ls[k].sqrt();
                bq += w / ls[k].sqrt();
            }
            shalf.set(i, j, a);
            sinvhalf.set(i, j, bq);
        }
    }
    let mut t = x.congruence(&shalf);
    t.symmetrize();
    let (lt, ut) = sym_eig(&t, true);
    let ut = ut.unwrap();
    if lt.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let mut g = sinvhalf.mul(&ut);
    for j in 0..n {
        let f = lt[j].powf(0.25);
        for i in 0..n {
            g.set(i, j, g.get(i, j) * f);
        }
    }
    let mut ginv = ut.transpose().mul(&shalf);
    for i in 0..n {
        let f = lt[i].powf(-0.25);
        for j in 0..n {
            ginv.set(i, j, ginv.get(i, j) * f);
        }
    }
    let v = lt.iter().map(|l| l.sqrt()).collect();
    Some(Scaling { g, ginv, v })
}

/// Largest step with `diag(v) + α·Δ ⪰ 0`.
fn max_step(v: &[f64], delta: &RMat) -> f64 {
    if delta.data.iter().any(|x| !x.is_finite()) {
        return 0.0;
    }
    let n = delta.dim;
    let mut scaled = delta.clone();
    for i in 0..n {
        for j in 0..n {
            let f = 1.0 / (v[i].sqrt() * v[j].sqrt());
            scaled.set(i, j, scaled.get(i, j) * f);
        }
    }
    let (vals, _) = sym_eig(&scaled, false);
    let min = *vals.last().unwrap();
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

struct StepInput<'a> {
    eta: f64,
    sigma_mu: f64,
    corr_tk: f64,
    rc: &'a [RMat],
}

pub(super) fn solve_validated(
    problem: &SdpProblem,
    params: &SolverParams,
) -> Result<SdpSolution, SdpError> {
    let internal = match preprocess(problem, params) {
        Preprocessed::Ok(i) => i,
        Preprocessed::Inconsistent { ray } => return Ok(infeasible_solution(problem, ray)),
    };
    let nb = internal.dims.len();
    let m = internal.rows.len();
    if std::env::var("MDIEW_SOLVER_TRACE").is_ok() {
        eprintln!("solve: {} (blocks {nb}, kept rows {m} of {})", problem.name, internal.n_orig);
    }
    let nu: f64 = internal.dims.iter().map(|d| *d as f64).sum::<f64>() + 1.0;

    let mut x: Vec<RMat> = internal.dims.iter().map(|&d| RMat::identity(d)).collect();
    let mut s: Vec<RMat> = internal.dims.iter().map(|&d| RMat::identity(d)).collect();
    let mut y = vec![0.0; m];
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;
    let mut stalls = 0usize;
    let mut iterations = 0usize;
    // Best iterate seen, by worst-of(primal residual, dual residual, gap);
    // early exits fall back to it instead of a freshly poisoned state.
    let mut best: Option<(f64, Vec<RMat>, Vec<f64>, f64)> = None;
    // Once the embedding has settled (κ/τ negligible, near-feasible), τ is
    // frozen and iterations continue as plain Newton steps on the scaled
    // problem; the bordered column of the self-dual system cancels to zero
    // digits near optimality and would otherwise poison the directions.
    let mut frozen = false;

    let finish = |status: SolveStatus,
                  x: &[RMat],
                  y: &[f64],
                  tau: f64,
                  iterations: usize,
                  certificate: Option<InfeasibilityCertificate>|
     -> SdpSolution {
        let primal_blocks: Vec<HermitianMatrix> = x
            .iter()
            .zip(&internal.kinds)
            .map(|(xb, kind)| {
                let mut scaled = xb.clone();
                scaled.scale(1.0 / tau);
                raise(*kind, &scaled)
            })
            .collect();
        let mut dual = vec![0.0; internal.n_orig];
        for (k, orig) in internal.kept.iter().enumerate() {
            dual[*orig] = y[k] / tau;
        }
        let primal_objective: f64 = problem
            .objective
            .iter()
            .zip(&primal_blocks)
            .map(|(c, xb)| c.trace_product(xb))
            .sum();
        let dual_objective: f64 = problem
            .constraints
            .iter()
            .zip(&dual)
            .map(|(c, yk)| c.rhs * yk)
            .sum();
        SdpSolution {
            status,
            primal_blocks,
            dual_multipliers: dual,
            primal_objective,
            dual_objective,
            gap: primal_objective - dual_objective,
            iterations,
            certificate,
        }
    };

    for iter in 0..params.max_iter {
        iterations = iter;
        // Residuals of the self-dual system.
        let mut rp = vec![0.0; m];
        for (k, row) in internal.rows.iter().enumerate() {
            let mut acc = -internal.b[k] * tau;
            for (bi, a) in row {
                acc += a.dot(&x[*bi]);
            }
            rp[k] = acc;
        }
        let mut rd: Vec<RMat> = (0..nb)
            .map(|i| {
                let mut acc = s[i].clone();
                acc.add_scaled(&internal.c[i], -tau);
                acc
            })
            .collect();
        for (k, row) in internal.rows.iter().enumerate() {
            if y[k] == 0.0 {
                continue;
            }
            for (bi, a) in row {
                rd[*bi].add_scaled(a, y[k]);
            }
        }
        let cx: f64 = internal.c.iter().zip(&x).map(|(c, xb)| c.dot(xb)).sum();
        let by: f64 = internal.b.iter().zip(&y).map(|(b, yk)| b * yk).sum();
        let rg = by - cx - kappa;
        let xs: f64 = x.iter().zip(&s).map(|(xb, sb)| xb.dot(sb)).sum();
        let mu = if frozen { xs / (nu - 1.0) } else { (xs + tau * kappa) / nu };

        // Convergence of the scaled candidate.
        let pinf = rp.iter().fold(0.0f64, |a, r| a.max(r.abs())) / tau;
        let dinf = rd.iter().fold(0.0f64, |a, r| a.max(r.max_abs())) / tau;
        let gap = (cx - by).abs() / tau;
        if std::env::var("MDIEW_SOLVER_TRACE").is_ok() {
            eprintln!(
                "it {iter:3} mu {mu:10.3e} tau {tau:10.3e} kappa {kappa:10.3e} pinf {pinf:10.3e} dinf {dinf:10.3e} gap {gap:10.3e} rg {rg:10.3e}"
            );
        }
        let score = pinf.max(dinf).max(gap);
        if best.as_ref().map_or(true, |(s, _, _, _)| score < *s) {
            best = Some((score, x.clone(), y.clone(), tau));
        }
        if pinf <= params.eps_feas && dinf <= params.eps_feas && gap <= params.eps_gap {
            return Ok(finish(SolveStatus::Optimal, &x, &y, tau, iterations, None));
        }

        if !frozen && pinf <= 1e-6 && dinf <= 1e-6 && kappa <= 1e-6 * tau {
            frozen = true;
        }

        // Farkas check: 𝒜ᵀy ⪯ ε with bᵀy > 0 proves primal infeasibility.
        if !frozen && by > 1e-12 {
            let mut max_eig = f64::NEG_INFINITY;
            for i in 0..nb {
                // Σ y_k A_ki = rd_i − s_i + c_i·τ
                let mut acc = rd[i].clone();
                acc.add_scaled(&s[i], -1.0);
                acc.add_scaled(&internal.c[i], tau);
                let (vals, _) = sym_eig(&acc, false);
                max_eig = max_eig.max(vals[0]);
            }
            if max_eig <= params.eps_feas * by {
                let mut ray = vec![0.0; internal.n_orig];
                for (k, orig) in internal.kept.iter().enumerate() {
                    ray[*orig] = y[k] / by;
                }
                let cert = InfeasibilityCertificate {
                    multipliers: ray,
                    objective_gain: 1.0,
                    ray_slack_max_eig: max_eig / by,
                };
                return Ok(finish(
                    SolveStatus::Infeasible,
                    &x,
                    &y,
                    tau,
                    iterations,
                    Some(cert),
                ));
            }
        }

        // NT scaling and scaled data.
        let mut scalings = Vec::with_capacity(nb);
        let mut ok = true;
        for i in 0..nb {
            match nt_scaling(&x[i], &s[i]) {
                Some(sc) => scalings.push(sc),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            if std::env::var("MDIEW_SOLVER_TRACE").is_ok() {
                eprintln!("break: nt scaling failed at iter {iter}");
            }
            break;
        }
        let scaled_rows: Vec<Vec<(usize, RMat)>> = internal
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(bi, a)| {
                        let mut sa = a.congruence(&scalings[*bi].g);
                        sa.symmetrize();
                        (*bi, sa)
                    })
                    .collect()
            })
            .collect();
        let c_hat: Vec<RMat> = (0..nb)
            .map(|i| {
                let mut ch = internal.c[i].congruence(&scalings[i].g);
                ch.symmetrize();
                ch
            })
            .collect();
        let rd_hat: Vec<RMat> = (0..nb)
            .map(|i| {
                let mut rh = rd[i].congruence(&scalings[i].g);
                rh.symmetrize();
                rh
            })
            .collect();

        // Schur complement over kept rows.
        let mut schur = vec![0.0; m * m];
        for k in 0..m {
            for l in 0..=k {
                let mut acc = 0.0;
                let (ra, rb) = (&scaled_rows[k], &scaled_rows[l]);
                let (mut ia, mut ib) = (0usize, 0usize);
                while ia < ra.len() && ib < rb.len() {
                    match ra[ia].0.cmp(&rb[ib].0) {
                        std::cmp::Ordering::Less => ia += 1,
                        std::cmp::Ordering::Greater => ib += 1,
                        std::cmp::Ordering::Equal => {
                            acc += ra[ia].1.dot(&rb[ib].1);
                            ia += 1;
                            ib += 1;
                        }
                    }
                }
                schur[k * m + l] = acc;
                schur[l * m + k] = acc;
            }
        }
        let mut chol = None;
        let mut jitter = 0.0;
        for attempt in 0..6 {
            if attempt > 0 {
                let base: f64 = (0..m).map(|k| schur[k * m + k]).fold(0.0f64, f64::max);
                let add = base.max(1e-300) * 1e-14 * 10f64.powi(attempt);
                for k in 0..m {
                    schur[k * m + k] += add - jitter;
                }
                jitter = add;
            }
            chol = cholesky(&schur, m);
            if chol.is_some() {
                break;
            }
        }
        let Some(chol) = chol else {
            if std::env::var("MDIEW_SOLVER_TRACE").is_ok() {
                eprintln!("break: cholesky failed at iter {iter}");
            }
            break;
        };

        let h: Vec<f64> = (0..m)
            .map(|k| {
                scaled_rows[k]
                    .iter()
                    .map(|(bi, a)| a.dot(&c_hat[*bi]))
                    .sum()
            })
            .collect();
        let q: f64 = c_hat.iter().map(|ch| ch.dot(ch)).sum();
        let hpb: Vec<f64> = h.iter().zip(&internal.b).map(|(hk, bk)| hk + bk).collect();
        let hmb: Vec<f64> = h.iter().zip(&internal.b).map(|(hk, bk)| hk - bk).collect();
        let z1 = cholesky_solve(&chol, m, &hpb);

        let newton = |inp: &StepInput| -> (Vec<f64>, f64, Vec<RMat>, Vec<RMat>, f64) {
            let mut work: Vec<RMat> = Vec::with_capacity(nb);
            for i in 0..nb {
                let mut w = inp.rc[i].clone();
                w.add_scaled(&rd_hat[i], inp.eta);
                work.push(w);
            }
            let u: Vec<f64> = (0..m)
                .map(|k| {
                    let mut acc = -inp.eta * rp[k];
                    for (bi, a) in &scaled_rows[k] {
                        acc -= a.dot(&work[*bi]);
                    }
                    acc
                })
                .collect();
            let cdotwork: f64 = (0..nb).map(|i| c_hat[i].dot(&work[i])).sum();
            let vr = inp.eta * rg - cdotwork - (inp.sigma_mu - tau * kappa - inp.corr_tk) / tau;
            let z2 = cholesky_solve(&chol, m, &u);
            let dtau = if frozen {
                0.0
            } else {
                let hmb_z1: f64 = hmb.iter().zip(&z1).map(|(a, b)| a * b).sum();
                let hmb_z2: f64 = hmb.iter().zip(&z2).map(|(a, b)| a * b).sum();
                let denom = hmb_z1 - (q + kappa / tau);
                (vr - hmb_z2) / denom
            };
            let dy: Vec<f64> = z2.iter().zip(&z1).map(|(a, b)| a + dtau * b).collect();
            let mut dx_hat = work;
            for i in 0..nb {
                dx_hat[i].add_scaled(&c_hat[i], -dtau);
            }
            for (k, row) in scaled_rows.iter().enumerate() {
                if dy[k] == 0.0 {
                    continue;
                }
                for (bi, a) in row {
                    dx_hat[*bi].add_scaled(a, dy[k]);
                }
            }
            let ds_hat: Vec<RMat> = (0..nb)
                .map(|i| {
                    let mut d = inp.rc[i].clone();
                    d.add_scaled(&dx_hat[i], -1.0);
                    d
                })
                .collect();
            let dkappa = if frozen {
                0.0
            } else {
                (inp.sigma_mu - tau * kappa - inp.corr_tk) / tau - (kappa / tau) * dtau
            };
            (dy, dtau, dx_hat, ds_hat, dkappa)
        };

        let step_bound = |dx_hat: &[RMat], ds_hat: &[RMat], dtau: f64, dkappa: f64| -> f64 {
            let mut a = f64::INFINITY;
            for i in 0..nb {
                a = a.min(max_step(&scalings[i].v, &dx_hat[i]));
                a = a.min(max_step(&scalings[i].v, &ds_hat[i]));
            }
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor: pure Newton toward residual elimination.
        let rc_aff: Vec<RMat> = (0..nb)
            .map(|i| {
                RMat::from_fn(internal.dims[i], |a, bq| {
                    if a == bq {
                        -scalings[i].v[a]
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let (_, dtau_a, dx_a, ds_a, dkappa_a) = newton(&StepInput {
            eta: 1.0,
            sigma_mu: 0.0,
            corr_tk: 0.0,
            rc: &rc_aff,
        });
        let alpha_aff = step_bound(&dx_a, &ds_a, dtau_a, dkappa_a).min(1.0);
        let mut mu_aff = if frozen {
            0.0
        } else {
            (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkappa_a)
        };
        for i in 0..nb {
            let d = internal.dims[i];
            for a in 0..d {
                for bq in 0..d {
                    let xa = if a == bq { scalings[i].v[a] } else { 0.0 }
                        + alpha_aff * dx_a[i].get(a, bq);
                    let sa = if a == bq { scalings[i].v[a] } else { 0.0 }
                        + alpha_aff * ds_a[i].get(a, bq);
                    mu_aff += xa * sa;
                }
            }
        }
        mu_aff /= if frozen { nu - 1.0 } else { nu };
        let sigma = (mu_aff / mu).powi(3).clamp(1e-10, 0.999_999);

        // Combined corrector step.
        let rc: Vec<RMat> = (0..nb)
            .map(|i| {
                let d = internal.dims[i];
                let v = &scalings[i].v;
                RMat::from_fn(d, |a, bq| {
                    let mut cross = 0.0;
                    for k in 0..d {
                        cross += dx_a[i].get(a, k) * ds_a[i].get(k, bq)
                            + ds_a[i].get(a, k) * dx_a[i].get(k, bq);
                    }
                    cross /= v[a] + v[bq];
                    let diag = if a == bq { sigma * mu / v[a] - v[a] } else { 0.0 };
                    diag - cross
                })
            })
            .collect();
        let (dy, dtau, dx_hat, ds_hat, dkappa) = newton(&StepInput {
            eta: 1.0 - sigma,
            sigma_mu: sigma * mu,
            corr_tk: dtau_a * dkappa_a,
            rc: &rc,
        });
        if !dtau.is_finite() || !dkappa.is_finite() || dy.iter().any(|d| !d.is_finite()) {
            if std::env::var("MDIEW_SOLVER_TRACE").is_ok() {
                eprintln!("break: non-finite direction at iter {iter}");
            }
            break;
        }
        let alpha = (STEP_FRACTION * step_bound(&dx_hat, &ds_hat, dtau, dkappa)).min(1.0);
        if alpha < 1e-8 {
            stalls += 1;
            if stalls >= 3 {
                if std::env::var("MDIEW_SOLVER_TRACE").is_ok() {
                    eprintln!("break: stalled at iter {iter}");
                }
                break;
            }
        } else {
            stalls = 0;
        }

        for i in 0..nb {
            let mut dx = dx_hat[i].congruence(&scalings[i].g.transpose());
            dx.symmetrize();
            x[i].add_scaled(&dx, alpha);
            x[i].symmetrize();
            let mut ds = ds_hat[i].congruence(&scalings[i].ginv);
            ds.symmetrize();
            s[i].add_scaled(&ds, alpha);
            s[i].symmetrize();
        }
        for (yk, dyk) in y.iter_mut().zip(&dy) {
            *yk += alpha * dyk;
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !tau.is_finite() || tau <= 0.0 {
            break;
        }
    }

    match best {
        Some((_, bx, by_vec, btau)) => Ok(finish(
            SolveStatus::MaxIterations,
            &bx,
            &by_vec,
            btau,
            iterations,
            None,
        )),
        None => Ok(finish(
            SolveStatus::MaxIterations,
            &x,
            &y,
            tau,
            iterations,
            None,
        )),
    }
}
