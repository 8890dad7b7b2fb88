//! Optimal policy under commitment: the Stackelberg problem solved by
//! the four-step "as if predetermined" construction, plus the rule
//! representations it supports.
//!
//! Step 1 solves the full-state Riccati problem pretending the jump
//! variables were predetermined. Step 2 checks the Lagrangian first-order
//! conditions along a simulated path with multipliers `mu_t = P y_t` (an
//! independent consistency check, not a solution method). Step 3 changes
//! variables to the true predetermined state `(k_t, mu_q_t)`, giving the
//! rule `Phi` and the closed loop `T`. Step 4 pins determinacy by
//! starting the multipliers of the jump variables at zero, so
//! `q_0 = -P_mm^{-1} P_mn k_0`.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::config::Tolerances;
use crate::error::{CommitmentError, RiccatiError};
use crate::model::{BoundednessReport, ModelSpec};
use crate::riccati::{loss_of_state, solve_dare, RiccatiSolution};
use crate::spectral;

/// Commitment solution on the augmented predetermined state.
#[derive(Clone, Debug)]
pub struct CommitmentSolution {
    /// Full-state value matrix P, partitioned at n.
    pub p: DMatrix<f64>,
    /// "As if predetermined" gain on y = (k, q).
    pub f: RowDVector<f64>,
    /// Rule coefficients on (k, mu_q): r - r* = Phi (k, mu_q).
    pub phi: RowDVector<f64>,
    /// Closed-loop transition on (k, mu_q).
    pub t_closed: DMatrix<f64>,
    /// Initial-condition map q_0 = q0_map k_0 (mu_q,0 = 0).
    pub q0_map: DMatrix<f64>,
    /// Inverse of P_mm (cached for recovering q from (k, mu_q)).
    pub p_mm_inv: DMatrix<f64>,
    /// Condition number of P_mm.
    pub p_mm_condition: f64,
    /// Max residuals of the two first-order conditions along the
    /// verification path.
    pub foc_residuals: (f64, f64),
    /// The underlying Riccati solve (residual, iterations, spectrum).
    pub riccati: RiccatiSolution,
    n: usize,
    m: usize,
}

impl CommitmentSolution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Jump variables implied by the augmented state:
    /// q = -P_mm^{-1} P_mn k + P_mm^{-1} mu_q.
    pub fn recover_q(&self, k: &DVector<f64>, mu_q: &DVector<f64>) -> DVector<f64> {
        &self.q0_map * k + &self.p_mm_inv * mu_q
    }

    /// Commitment loss from `k0` with the determinate initial condition.
    pub fn loss_from_k0(&self, k0: &DVector<f64>) -> f64 {
        let y0 = self.initial_state(k0);
        loss_of_state(&self.p, &y0)
    }

    /// The date-0 state y_0 = (k_0, q0_map k_0).
    pub fn initial_state(&self, k0: &DVector<f64>) -> DVector<f64> {
        let q0 = &self.q0_map * k0;
        let mut y0 = DVector::zeros(self.n + self.m);
        y0.rows_mut(0, self.n).copy_from(k0);
        y0.rows_mut(self.n, self.m).copy_from(&q0);
        y0
    }
}

/// History-dependent form of the commitment rule (m = 1 only):
/// r_t = psi_r r_{t-1} + psi_k0 k_t + psi_k1 k_{t-1}.
#[derive(Clone, Debug)]
pub struct HistoryRule {
    pub psi_r: f64,
    pub psi_k0: RowDVector<f64>,
    pub psi_k1: RowDVector<f64>,
    /// 2n + 1 coefficients.
    pub parameter_count: usize,
    /// Whether the coefficient count matches the n + m distinct
    /// eigenvalues it would have to encode; false flags
    /// over-parameterization.
    pub identified: bool,
}

impl HistoryRule {
    /// Replays the rule on a stored path: r_t from (r_{t-1}, k_t, k_{t-1}).
    pub fn replay(&self, r_prev: f64, k_t: &DVector<f64>, k_prev: &DVector<f64>) -> f64 {
        self.psi_r * r_prev + (&self.psi_k0 * k_t)[0] + (&self.psi_k1 * k_prev)[0]
    }
}

/// Outcome of re-optimizing mid-path (resetting mu_q to zero).
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub reset_time: usize,
    /// Jump variables just before and just after the reset.
    pub q_before: DVector<f64>,
    pub q_after: DVector<f64>,
    pub jump_norm: f64,
    /// Boundedness of the post-reset path.
    pub reset_boundedness: BoundednessReport,
    /// Discounted loss of continuing the committed path from the reset
    /// state, and of the re-optimized path.
    pub continuation_loss: f64,
    pub reset_loss: f64,
    /// reset_loss - continuation_loss (non-positive: re-optimizing helps
    /// the planner, which is exactly the temptation).
    pub loss_difference: f64,
}

/// Solves the commitment problem. Refuses when (A, B) fails the Kalman
/// rank test over the full state; errors when P_mm is numerically
/// singular (no Phi representation) or the first-order conditions fail
/// to verify.
pub fn solve_commitment(
    model: &ModelSpec,
    tol: &Tolerances,
) -> Result<CommitmentSolution, CommitmentError> {
    let (n, m) = (model.n, model.m);
    let report = spectral::controllability(&model.a, &model.b, tol)?;
    if !report.full {
        return Err(CommitmentError::NotControllable { report });
    }

    // Step 1: full-state Riccati solve as if q were predetermined.
    let riccati = match solve_dare(&model.a, &model.b, &model.q, model.rho, model.beta, tol) {
        Ok(r) => r,
        Err(RiccatiError::NotControllable { report }) => {
            return Err(CommitmentError::NotControllable { report })
        }
        Err(e) => return Err(CommitmentError::Riccati(e)),
    };
    let p = riccati.p.clone();
    let f = riccati.f.clone();

    // Step 2: verify the first-order conditions with mu_t = P y_t along
    // a generic simulated path.
    let closed = &model.a - &model.b * &f;
    let mut y = DVector::from_element(n + m, 1.0);
    let mut worst_r = 0.0f64;
    let mut worst_y = 0.0f64;
    for _ in 0..100 {
        let y_next = &closed * &y;
        let mu_next = &p * &y_next;
        let r_dev = -(&f * &y)[0];
        let foc_r = model.rho * r_dev + model.beta * (model.b.transpose() * &mu_next)[(0, 0)];
        let foc_y = (&p * &y) - (&model.q * &y) - model.beta * (model.a.transpose() * &mu_next);
        worst_r = worst_r.max(foc_r.abs());
        worst_y = worst_y.max(foc_y.abs().max());
        y = y_next;
    }
    if worst_r > tol.foc || worst_y > tol.foc {
        return Err(CommitmentError::FocResidual {
            residual: worst_r.max(worst_y),
            tolerance: tol.foc,
        });
    }

    // Step 3: change variables to (k, mu_q).
    let p_mn = p.view((n, 0), (m, n)).into_owned();
    let p_mm = p.view((n, n), (m, m)).into_owned();
    let p_mm_condition = spectral::condition_number_real(&p_mm);
    if !p_mm_condition.is_finite() || p_mm_condition > tol.condition_max {
        return Err(CommitmentError::SingularPmm {
            condition: p_mm_condition,
        });
    }
    let p_mm_inv = p_mm
        .clone()
        .try_inverse()
        .ok_or(CommitmentError::SingularPmm {
            condition: p_mm_condition,
        })?;
    let q0_map = -&p_mm_inv * &p_mn;

    // S maps y to (k, mu_q); its inverse recovers y.
    let d = n + m;
    let mut s = DMatrix::zeros(d, d);
    s.view_mut((0, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    s.view_mut((n, 0), (m, n)).copy_from(&p_mn);
    s.view_mut((n, n), (m, m)).copy_from(&p_mm);
    let mut s_inv = DMatrix::zeros(d, d);
    s_inv
        .view_mut((0, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    s_inv.view_mut((n, 0), (m, n)).copy_from(&q0_map);
    s_inv.view_mut((n, n), (m, m)).copy_from(&p_mm_inv);

    let phi = -(&f * &s_inv);
    let t_closed = &s * &closed * &s_inv;

    Ok(CommitmentSolution {
        p,
        f,
        phi,
        t_closed,
        q0_map,
        p_mm_inv,
        p_mm_condition,
        foc_residuals: (worst_r, worst_y),
        riccati,
        n,
        m,
    })
}

/// Eliminates the multiplier from the commitment rule, leaving the
/// history-dependent form on (r_{t-1}, k_t, k_{t-1}). Only defined for a
/// single jump variable.
pub fn build_history_rule(
    sol: &CommitmentSolution,
    model: &ModelSpec,
    tol: &Tolerances,
) -> Result<HistoryRule, CommitmentError> {
    if model.m != 1 {
        return Err(CommitmentError::HistoryRuleUnsupported { m: model.m });
    }
    let n = model.n;
    let phi_k = sol.phi.columns(0, n).into_owned();
    let phi_mu = sol.phi[n];
    if phi_mu.abs() <= tol.rule_coef_min {
        return Err(CommitmentError::DegenerateElimination {
            coefficient: phi_mu,
        });
    }
    // mu_q row of the closed loop: mu_{q,t+1} = t_mu_k k_t + t_mu_mu mu_q_t.
    let t_mu_k = sol.t_closed.view((n, 0), (1, n)).into_owned();
    let t_mu_mu = sol.t_closed[(n, n)];

    // Substitute mu_{q,t-1} = (r_{t-1} - Phi_k k_{t-1}) / Phi_mu into the
    // advanced rule.
    let psi_r = t_mu_mu;
    let psi_k0 = phi_k.clone();
    let psi_k1 = RowDVector::from_iterator(
        n,
        (0..n).map(|j| phi_mu * t_mu_k[(0, j)] - t_mu_mu * phi_k[j]),
    );
    let parameter_count = 2 * n + 1;
    Ok(HistoryRule {
        psi_r,
        psi_k0,
        psi_k1,
        parameter_count,
        identified: parameter_count == n + model.m,
    })
}

/// Single-instrument pole placement via Ackermann's formula: the unique
/// gain row making the closed-loop characteristic polynomial match the
/// target spectrum. Requires controllability, conjugate-closed targets,
/// and pairwise distinct targets.
pub fn identify_rule_from_spectrum(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    targets: &[Complex<f64>],
    tol: &Tolerances,
) -> Result<RowDVector<f64>, CommitmentError> {
    let d = a.nrows();
    if !a.is_square() || b.nrows() != d || b.ncols() != 1 {
        return Err(CommitmentError::Dimension(format!(
            "A {}x{} with B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if targets.len() != d {
        return Err(CommitmentError::Dimension(format!(
            "{} targets for a {d}-state system",
            targets.len()
        )));
    }

    let report = spectral::controllability(a, b, tol)?;
    if !report.full {
        return Err(CommitmentError::NotControllable { report });
    }

    let scale = targets.iter().map(|t| t.norm()).fold(0.0f64, f64::max);
    let pair_tol = (tol.distinctness * scale).max(1e-12);
    for i in 0..d {
        for j in (i + 1)..d {
            let gap = (targets[i] - targets[j]).norm();
            if gap <= pair_tol {
                return Err(CommitmentError::RepeatedTargets { gap, a: i, b: j });
            }
        }
    }
    // Conjugate closure: every complex target needs its mirror.
    for (i, t) in targets.iter().enumerate() {
        if t.im.abs() > pair_tol {
            let found = targets
                .iter()
                .enumerate()
                .any(|(j, u)| j != i && (u - t.conj()).norm() <= pair_tol);
            if !found {
                return Err(CommitmentError::TargetsNotConjugateClosed);
            }
        }
    }

    // Monic characteristic polynomial of the targets, expanded in
    // complex arithmetic; conjugate closure makes it real.
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for t in targets {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * t;
        }
        coeffs = next;
    }
    let max_im = coeffs.iter().map(|c| c.im.abs()).fold(0.0f64, f64::max);
    let coeff_scale = coeffs.iter().map(|c| c.norm()).fold(1.0f64, f64::max);
    if max_im > 1e-10 * coeff_scale {
        return Err(CommitmentError::TargetsNotConjugateClosed);
    }
    let real_coeffs: Vec<f64> = coeffs.iter().map(|c| c.re).collect();

    // Horner evaluation of the polynomial at A.
    let mut phi_a = DMatrix::identity(d, d);
    for &c in &real_coeffs[1..] {
        phi_a = &phi_a * a + DMatrix::identity(d, d) * c;
    }

    // F = e_d' C^{-1} phi(A) with C the controllability matrix.
    let mut ctrb = DMatrix::zeros(d, d);
    let mut col = b.clone();
    for j in 0..d {
        ctrb.view_mut((0, j), (d, 1)).copy_from(&col);
        if j + 1 < d {
            col = a * &col;
        }
    }
    let mut e_last = DVector::zeros(d);
    e_last[d - 1] = 1.0;
    let w = ctrb
        .transpose()
        .lu()
        .solve(&e_last)
        .ok_or(CommitmentError::NotControllable { report })?;
    let gain = RowDVector::from_iterator(d, (w.transpose() * phi_a).iter().copied());

    // Round trip: the achieved spectrum must land on the targets.
    let achieved = (a - b * &gain).complex_eigenvalues();
    let mut taken = vec![false; d];
    let mut worst = 0.0f64;
    for t in targets {
        let mut best: Option<(usize, f64)> = None;
        for (j, l) in achieved.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let dist = (l - t).norm();
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((j, dist));
            }
        }
        let (j, dist) = best.expect("achieved spectrum has d entries");
        taken[j] = true;
        worst = worst.max(dist);
    }
    if worst > tol.identification {
        return Err(CommitmentError::PlacementFailed { deviation: worst });
    }
    Ok(gain)
}

/// Simulates the committed path, then restarts at `reset_time` with the
/// jump-variable multipliers put back to zero, the way a re-optimizing
/// planner without a commitment device would.
pub fn time_inconsistency_probe(
    sol: &CommitmentSolution,
    model: &ModelSpec,
    k0: &DVector<f64>,
    reset_time: usize,
    horizon: usize,
    tol: &Tolerances,
) -> Result<ProbeReport, CommitmentError> {
    if k0.len() != sol.n {
        return Err(CommitmentError::Dimension(format!(
            "k0 has length {}, expected {}",
            k0.len(),
            sol.n
        )));
    }
    let (n, m) = (sol.n, sol.m);

    // Committed path on (k, mu_q) up to the reset date.
    let mut state = DVector::zeros(n + m);
    state.rows_mut(0, n).copy_from(k0);
    for _ in 0..reset_time {
        state = &sol.t_closed * &state;
    }
    let k_reset = state.rows(0, n).into_owned();
    let mu_reset = state.rows(n, m).into_owned();
    let q_before = sol.recover_q(&k_reset, &mu_reset);
    let q_after = sol.recover_q(&k_reset, &DVector::zeros(m));
    let jump_norm = (&q_after - &q_before).norm();

    // Value of continuing versus re-optimizing, both as quadratic forms
    // in the full-state value matrix.
    let stack = |q: &DVector<f64>| {
        let mut y = DVector::zeros(n + m);
        y.rows_mut(0, n).copy_from(&k_reset);
        y.rows_mut(n, m).copy_from(q);
        y
    };
    let continuation_loss = loss_of_state(&sol.p, &stack(&q_before));
    let reset_loss = loss_of_state(&sol.p, &stack(&q_after));

    // Post-reset path boundedness.
    let law = crate::analysis::SimLaw::commitment(sol);
    let steps = horizon.max(reset_time + 50) - reset_time;
    let mut reset_state = DVector::zeros(n + m);
    reset_state.rows_mut(0, n).copy_from(&k_reset);
    let traj = crate::analysis::simulate(model, &law, &reset_state, steps as u64, tol)
        .map_err(|e| CommitmentError::Dimension(e.to_string()))?;
    let reset_boundedness = crate::analysis::boundedness_of(&traj, model.beta, tol);

    Ok(ProbeReport {
        reset_time,
        q_before,
        q_after,
        jump_norm,
        reset_boundedness,
        continuation_loss,
        reset_loss,
        loss_difference: reset_loss - continuation_loss,
    })
}
