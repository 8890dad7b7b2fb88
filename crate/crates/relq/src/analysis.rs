//! Closed-loop simulation, boundedness verification, loss accounting,
//! and the identification and covariance experiments run as executable
//! comparisons.
//!
//! Moments over deterministic trajectories are equal-weight averages
//! over t in [0, T); that is the operationalization of "covariance" used
//! throughout and reports label it as such. Least-squares recovery never
//! falls back to ridge regularization: a rank-deficient regressor matrix
//! is itself a finding (the non-identification result), so masking it
//! would defeat the experiment.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::bk::{self, QuasiOptimalSolution};
use crate::commitment::{self, CommitmentSolution};
use crate::config::Tolerances;
use crate::error::AnalysisError;
use crate::model::{BoundednessReport, ModelSpec, PolicyRule};
use crate::spectral;

/// A closed-loop law to iterate, together with how to read states out of
/// its coordinate system.
#[derive(Clone, Debug)]
pub enum SimLaw {
    /// Full state y = (k, q), instrument r - r* = -gain y. The only law
    /// that applies the exogenous term gamma z_t when the model has one.
    Full {
        transition: DMatrix<f64>,
        gain: RowDVector<f64>,
    },
    /// Reduced state k with jump variables lifted through q = -N k and
    /// r - r* = -gain k.
    Reduced {
        transition: DMatrix<f64>,
        gain: RowDVector<f64>,
        n_matrix: DMatrix<f64>,
    },
    /// Commitment state (k, mu_q) with r - r* = phi (k, mu_q) and
    /// q = q0_map k + p_mm_inv mu_q.
    Commitment {
        transition: DMatrix<f64>,
        phi: RowDVector<f64>,
        q0_map: DMatrix<f64>,
        p_mm_inv: DMatrix<f64>,
    },
}

impl SimLaw {
    /// Closed loop A - BF of a rule in y-coordinates.
    pub fn full(model: &ModelSpec, rule: &PolicyRule) -> Self {
        SimLaw::Full {
            transition: model.closed_loop(rule),
            gain: rule.stacked(),
        }
    }

    /// Reduced quasi-optimal loop k_{t+1} = (A' - B_n F') k_t lifted by N.
    pub fn quasi_optimal(
        model: &ModelSpec,
        quasi: &QuasiOptimalSolution,
        n_matrix: &DMatrix<f64>,
    ) -> Self {
        SimLaw::Reduced {
            transition: &quasi.a_reduced - model.b_n() * &quasi.riccati.f,
            gain: quasi.riccati.f.clone(),
            n_matrix: n_matrix.clone(),
        }
    }

    /// Commitment loop on (k, mu_q).
    pub fn commitment(sol: &CommitmentSolution) -> Self {
        SimLaw::Commitment {
            transition: sol.t_closed.clone(),
            phi: sol.phi.clone(),
            q0_map: sol.q0_map.clone(),
            p_mm_inv: sol.p_mm_inv.clone(),
        }
    }

    fn state_dim(&self) -> usize {
        match self {
            SimLaw::Full { transition, .. }
            | SimLaw::Reduced { transition, .. }
            | SimLaw::Commitment { transition, .. } => transition.nrows(),
        }
    }
}

/// A simulated path in deviation coordinates.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Number of recorded periods (t = 0..horizon).
    pub horizon: usize,
    pub k: Vec<DVector<f64>>,
    pub q: Vec<DVector<f64>>,
    pub r: Vec<f64>,
    /// Multiplier path, recorded for commitment laws only.
    pub mu_q: Option<Vec<DVector<f64>>>,
    /// Norms of the law's own state vector, per period.
    pub state_norms: Vec<f64>,
    /// Sum of beta^t (y' Q y + rho (r - r*)^2) over recorded periods.
    pub discounted_loss: f64,
    /// Least-squares slope of log state-norm over the last half.
    pub growth_exponent: f64,
    /// True when the state norm crossed the divergence cutoff and the
    /// simulation was truncated.
    pub divergent: bool,
    beta: f64,
}

impl Trajectory {
    /// Stacked deviation state y_t = (k_t, q_t).
    pub fn y(&self, t: usize) -> DVector<f64> {
        let n = self.k[t].len();
        let m = self.q[t].len();
        let mut y = DVector::zeros(n + m);
        y.rows_mut(0, n).copy_from(&self.k[t]);
        y.rows_mut(n, m).copy_from(&self.q[t]);
        y
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Iterates a closed-loop law for `horizon` periods from `initial` (in
/// the law's own coordinates), accounting the discounted loss with the
/// model's weights. Truncates and flags the path when the state norm
/// passes the divergence cutoff.
pub fn simulate(
    model: &ModelSpec,
    law: &SimLaw,
    initial: &DVector<f64>,
    horizon: u64,
    tol: &Tolerances,
) -> Result<Trajectory, AnalysisError> {
    if horizon < 1 {
        return Err(AnalysisError::HorizonTooShort {
            minimum: 1,
            got: horizon,
        });
    }
    if initial.len() != law.state_dim() {
        return Err(AnalysisError::Dimension(format!(
            "initial state has length {}, law expects {}",
            initial.len(),
            law.state_dim()
        )));
    }
    let (n, m) = (model.n, model.m);
    let horizon = horizon as usize;

    let exogenous = match (law, &model.gamma, &model.z_path) {
        (SimLaw::Full { .. }, Some(gamma), Some(z)) => {
            if z.len() < horizon {
                return Err(AnalysisError::ExogenousTooShort {
                    len: z.len(),
                    horizon: horizon as u64,
                });
            }
            Some((gamma, z))
        }
        _ => None,
    };

    let mut k_series = Vec::with_capacity(horizon);
    let mut q_series = Vec::with_capacity(horizon);
    let mut r_series = Vec::with_capacity(horizon);
    let mut mu_series: Option<Vec<DVector<f64>>> = match law {
        SimLaw::Commitment { .. } => Some(Vec::with_capacity(horizon)),
        _ => None,
    };
    let mut norms = Vec::with_capacity(horizon);
    let mut loss = 0.0;
    let mut discount = 1.0;
    let mut divergent = false;

    let mut state = initial.clone();
    for t in 0..horizon {
        let (k_t, q_t, r_t) = match law {
            SimLaw::Full { gain, .. } => {
                let k_t = state.rows(0, n).into_owned();
                let q_t = state.rows(n, m).into_owned();
                let r_t = -(gain * &state)[0];
                (k_t, q_t, r_t)
            }
            SimLaw::Reduced { gain, n_matrix, .. } => {
                let k_t = state.clone();
                let q_t = -(n_matrix * &state);
                let r_t = -(gain * &state)[0];
                (k_t, q_t, r_t)
            }
            SimLaw::Commitment {
                phi,
                q0_map,
                p_mm_inv,
                ..
            } => {
                let k_t = state.rows(0, n).into_owned();
                let mu_t = state.rows(n, m).into_owned();
                let q_t = q0_map * &k_t + p_mm_inv * &mu_t;
                let r_t = (phi * &state)[0];
                mu_series
                    .as_mut()
                    .expect("commitment law records mu")
                    .push(mu_t);
                (k_t, q_t, r_t)
            }
        };

        let mut y = DVector::zeros(n + m);
        y.rows_mut(0, n).copy_from(&k_t);
        y.rows_mut(n, m).copy_from(&q_t);
        loss += discount * ((y.transpose() * &model.q * &y)[0] + model.rho * r_t * r_t);
        discount *= model.beta;

        norms.push(state.norm());
        k_series.push(k_t);
        q_series.push(q_t);
        r_series.push(r_t);

        if state.norm() > tol.divergence_norm {
            divergent = true;
            break;
        }

        state = match law {
            SimLaw::Full { transition, .. }
            | SimLaw::Reduced { transition, .. }
            | SimLaw::Commitment { transition, .. } => transition * &state,
        };
        if let Some((gamma, z)) = exogenous {
            state += gamma * &z[t];
        }
    }

    let growth_exponent = fit_growth_exponent(&norms);
    Ok(Trajectory {
        horizon: k_series.len(),
        k: k_series,
        q: q_series,
        r: r_series,
        mu_q: mu_series,
        state_norms: norms,
        discounted_loss: loss,
        growth_exponent,
        divergent,
        beta: model.beta,
    })
}

/// Least-squares slope of log norm against time over the window
/// [T/2, T). Returns -inf when the tail carries fewer than two usable
/// (nonzero-norm) points.
fn fit_growth_exponent(norms: &[f64]) -> f64 {
    let start = norms.len() / 2;
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, &v)| v > 1e-300)
        .map(|(t, &v)| (t as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let len = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let mean_v = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, v) in &pts {
        cov += (t - mean_t) * (v - mean_v);
        var += (t - mean_t) * (t - mean_t);
    }
    if var == 0.0 {
        f64::NEG_INFINITY
    } else {
        cov / var
    }
}

/// Boundedness verdict without the horizon precondition (internal use).
pub fn boundedness_of(traj: &Trajectory, beta: f64, tol: &Tolerances) -> BoundednessReport {
    let log_threshold = (1.0 / beta.sqrt()).ln();
    BoundednessReport {
        growth_exponent: traj.growth_exponent,
        log_threshold,
        bound_satisfied: traj.growth_exponent < log_threshold - tol.stability_margin,
    }
}

/// Tests the no-bubble bound: growth exponent below log(1/sqrt(beta)) by
/// the stability margin. Requires at least 50 simulated periods.
pub fn check_boundedness(
    traj: &Trajectory,
    beta: f64,
    tol: &Tolerances,
) -> Result<BoundednessReport, AnalysisError> {
    if traj.horizon < 50 {
        return Err(AnalysisError::HorizonTooShort {
            minimum: 50,
            got: traj.horizon as u64,
        });
    }
    Ok(boundedness_of(traj, beta, tol))
}

/// Outcome of the observational-equivalence experiment: an augmented
/// rule and its restriction generate the same data, and that data spans
/// only n of the n+m state directions.
#[derive(Clone, Debug)]
pub struct BkIdentificationReport {
    /// The restricted rule compared against.
    pub restricted_rule: PolicyRule,
    /// Max gap between the two instrument paths.
    pub r_max_diff: f64,
    /// True when the gap is below the equivalence tolerance.
    pub equivalent: bool,
    /// Numerical rank of the stacked (k, q) regressors.
    pub regressor_rank: usize,
    pub expected_rank: usize,
    /// n + m minus the achieved rank (expected: m).
    pub rank_deficiency: usize,
    pub singular_values: Vec<f64>,
}

/// Simulates the rational-expectations equilibrium of an augmented rule
/// and compares the instrument it prescribes against its observationally
/// equivalent restriction on the same data.
///
/// The equilibrium path is generated on the saddle manifold (jump
/// variables re-selected as q = -N k every period, which is what makes
/// them jump variables); both rules are then read out on that shared
/// path. Free-running the full closed loop instead would amplify
/// rounding off the manifold by the unstable root each period and
/// measure floating-point drift rather than the equivalence.
pub fn identification_experiment_bk(
    model: &ModelSpec,
    rule_a: &PolicyRule,
    n_matrix: &DMatrix<f64>,
    k0: &DVector<f64>,
    horizon: u64,
    tol: &Tolerances,
) -> Result<BkIdentificationReport, AnalysisError> {
    if k0.len() != model.n {
        return Err(AnalysisError::Dimension(format!(
            "k0 has length {}, expected {}",
            k0.len(),
            model.n
        )));
    }
    let restricted = bk::observational_equivalence(rule_a, n_matrix);
    // Equilibrium dynamics: both rules imply the same reduced loop
    // k_{t+1} = (A' - B_n F') k_t.
    let law = SimLaw::Reduced {
        transition: (model.a_nn() - model.a_nm() * n_matrix) - model.b_n() * &restricted.f_k,
        gain: restricted.f_k.clone(),
        n_matrix: n_matrix.clone(),
    };
    let traj = simulate(model, &law, k0, horizon, tol)?;

    let r_max_diff = (0..traj.horizon)
        .map(|t| {
            let y = traj.y(t);
            (rule_a.apply(&y) - restricted.apply(&y)).abs()
        })
        .fold(0.0f64, f64::max);

    let regressors = stack_states(&traj);
    let (rank, singular_values) = spectral::numerical_rank(&regressors, model.dim(), tol.rank_rel);

    Ok(BkIdentificationReport {
        restricted_rule: restricted,
        r_max_diff,
        equivalent: r_max_diff < tol.equivalence,
        regressor_rank: rank,
        expected_rank: model.n,
        rank_deficiency: model.dim() - rank,
        singular_values,
    })
}

/// Outcome of recovering the commitment rule from simulated data.
#[derive(Clone, Debug)]
pub struct CommitmentIdentificationReport {
    pub recovered_phi: RowDVector<f64>,
    pub expected_phi: RowDVector<f64>,
    pub max_coefficient_error: f64,
    /// True when every coefficient matched within the identification
    /// tolerance.
    pub identified: bool,
    pub regressor_rank: usize,
    /// True when the initial condition had to be perturbed to escape an
    /// eigenvector-aligned start.
    pub retried: bool,
}

/// Regresses the instrument on the commitment state (k, mu_q) along a
/// simulated path and compares against Phi. Refuses a zero initial
/// condition; retries with a seeded perturbation when the start is
/// degenerate (regressors rank-deficient).
pub fn identification_experiment_commitment(
    model: &ModelSpec,
    sol: &CommitmentSolution,
    k0: &DVector<f64>,
    horizon: u64,
    seed: u64,
    tol: &Tolerances,
) -> Result<CommitmentIdentificationReport, AnalysisError> {
    use rand::{Rng, SeedableRng};
    if k0.len() != model.n {
        return Err(AnalysisError::Dimension(format!(
            "k0 has length {}, expected {}",
            k0.len(),
            model.n
        )));
    }
    if k0.norm() == 0.0 {
        return Err(AnalysisError::Refused(
            "k0 = 0 generates the zero path; nothing to identify".to_string(),
        ));
    }
    let law = SimLaw::commitment(sol);
    let d = model.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut k0_try = k0.clone();
    const MAX_ATTEMPTS: usize = 3;
    for attempt in 0..MAX_ATTEMPTS {
        let mut initial = DVector::zeros(d);
        initial.rows_mut(0, model.n).copy_from(&k0_try);
        let traj = simulate(model, &law, &initial, horizon, tol)?;

        // Regressors (k_t, mu_q_t).
        let mu = traj.mu_q.as_ref().expect("commitment law records mu");
        let t_len = traj.horizon;
        let mut x = DMatrix::zeros(t_len, d);
        let mut r = DVector::zeros(t_len);
        for t in 0..t_len {
            for j in 0..model.n {
                x[(t, j)] = traj.k[t][j];
            }
            for j in 0..model.m {
                x[(t, model.n + j)] = mu[t][j];
            }
            r[t] = traj.r[t];
        }
        let (rank, _) = spectral::numerical_rank(&x, d, tol.rank_rel);
        if rank < d {
            if attempt + 1 == MAX_ATTEMPTS {
                return Err(AnalysisError::RankDeficient {
                    attempts: MAX_ATTEMPTS,
                    rank,
                    expected: d,
                });
            }
            let scale = 1e-3 * k0.norm().max(1.0);
            k0_try = k0 + DVector::from_fn(model.n, |_, _| rng.gen_range(-1.0..1.0) * scale);
            continue;
        }

        let svd = x.svd(true, true);
        let coef = svd
            .solve(&r, 0.0)
            .map_err(|e| AnalysisError::Dimension(e.to_string()))?;
        let recovered = RowDVector::from_iterator(d, coef.iter().copied());
        let max_coefficient_error = (&recovered - &sol.phi).abs().max();
        return Ok(CommitmentIdentificationReport {
            recovered_phi: recovered,
            expected_phi: sol.phi.clone(),
            max_coefficient_error,
            identified: max_coefficient_error < tol.identification,
            regressor_rank: rank,
            retried: attempt > 0,
        });
    }
    unreachable!("the retry loop either returns or errors")
}

/// Covariance contrast between the quasi-optimal and commitment
/// solutions under a loss-weight perturbation.
#[derive(Clone, Debug)]
pub struct CovarianceReport {
    /// Size of the Q_nm perturbation applied entrywise.
    pub perturbation: f64,
    /// Max-norm change of the saddle matrix N (structurally zero).
    pub n_gap: f64,
    /// Sample k-q cross moments of the quasi-optimal path, base and
    /// perturbed, and their gap.
    pub bk_cross_base: DMatrix<f64>,
    pub bk_cross_perturbed: DMatrix<f64>,
    pub bk_cross_gap: f64,
    /// Same for the commitment path.
    pub commitment_cross_base: DMatrix<f64>,
    pub commitment_cross_perturbed: DMatrix<f64>,
    pub commitment_cross_gap: f64,
}

/// Runs the four-way comparison: quasi-optimal and commitment solutions
/// under the baseline and a perturbed Q_nm, reporting that the BK map
/// q = -N k never moves while the commitment k-q relation does.
pub fn covariance_comparison(
    model: &ModelSpec,
    k0: &DVector<f64>,
    horizon: u64,
    perturbation: f64,
    tol: &Tolerances,
) -> Result<CovarianceReport, AnalysisError> {
    let mut perturbed = model.clone();
    for i in 0..model.n {
        for j in 0..model.m {
            perturbed.q[(i, model.n + j)] += perturbation;
            perturbed.q[(model.n + j, i)] += perturbation;
        }
    }

    // The saddle manifold of the open-loop rule does not involve Q at
    // all; recompute it under both weights to demonstrate that.
    let open = PolicyRule::zero(model.n, model.m);
    let base_manifold = bk::select_manifold(model, &open, tol)?;
    let pert_manifold = bk::select_manifold(&perturbed, &open, tol)?;
    let n_gap = (&base_manifold.n_matrix - &pert_manifold.n_matrix)
        .abs()
        .max();

    let cross = |traj: &Trajectory| -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(model.n, model.m);
        for t in 0..traj.horizon {
            acc += &traj.k[t] * traj.q[t].transpose();
        }
        acc / traj.horizon as f64
    };

    let quasi_base = bk::solve_quasi_optimal(model, &base_manifold.n_matrix, tol)?;
    let quasi_pert = bk::solve_quasi_optimal(&perturbed, &base_manifold.n_matrix, tol)?;
    let bk_base = simulate(
        model,
        &SimLaw::quasi_optimal(model, &quasi_base, &base_manifold.n_matrix),
        k0,
        horizon,
        tol,
    )?;
    let bk_pert = simulate(
        &perturbed,
        &SimLaw::quasi_optimal(&perturbed, &quasi_pert, &base_manifold.n_matrix),
        k0,
        horizon,
        tol,
    )?;
    let bk_cross_base = cross(&bk_base);
    let bk_cross_perturbed = cross(&bk_pert);
    let bk_cross_gap = (&bk_cross_base - &bk_cross_perturbed).abs().max();

    let commit_base = commitment::solve_commitment(model, tol)?;
    let commit_pert = commitment::solve_commitment(&perturbed, tol)?;
    let mut initial = DVector::zeros(model.dim());
    initial.rows_mut(0, model.n).copy_from(k0);
    let c_base = simulate(
        model,
        &SimLaw::commitment(&commit_base),
        &initial,
        horizon,
        tol,
    )?;
    let c_pert = simulate(
        &perturbed,
        &SimLaw::commitment(&commit_pert),
        &initial,
        horizon,
        tol,
    )?;
    let commitment_cross_base = cross(&c_base);
    let commitment_cross_perturbed = cross(&c_pert);
    let commitment_cross_gap = (&commitment_cross_base - &commitment_cross_perturbed)
        .abs()
        .max();

    Ok(CovarianceReport {
        perturbation,
        n_gap,
        bk_cross_base,
        bk_cross_perturbed,
        bk_cross_gap,
        commitment_cross_base,
        commitment_cross_perturbed,
        commitment_cross_gap,
    })
}

/// Writes a trajectory as CSV: header `t,<labels...>[,mu_...],r`, one
/// row per period, 17 significant digits.
pub fn write_trajectory_csv<W: std::io::Write>(
    traj: &Trajectory,
    labels: &[String],
    writer: &mut W,
) -> Result<(), AnalysisError> {
    let n = traj.k.first().map_or(0, |k| k.len());
    let m = traj.q.first().map_or(0, |q| q.len());
    let mut header = vec!["t".to_string()];
    header.extend_from_slice(labels);
    if traj.mu_q.is_some() {
        for label in labels.iter().skip(n).take(m) {
            header.push(format!("mu_{label}"));
        }
    }
    header.push("r".to_string());
    writeln!(writer, "{}", header.join(","))?;

    for t in 0..traj.horizon {
        let mut fields = vec![t.to_string()];
        for j in 0..n {
            fields.push(crate::jsonfmt::format_f64(traj.k[t][j]));
        }
        for j in 0..m {
            fields.push(crate::jsonfmt::format_f64(traj.q[t][j]));
        }
        if let Some(mu) = &traj.mu_q {
            for value in mu[t].iter().take(m) {
                fields.push(crate::jsonfmt::format_f64(*value));
            }
        }
        fields.push(crate::jsonfmt::format_f64(traj.r[t]));
        writeln!(writer, "{}", fields.join(","))?;
    }
    Ok(())
}

/// T x (n+m) matrix of stacked (k_t, q_t) rows.
fn stack_states(traj: &Trajectory) -> DMatrix<f64> {
    let n = traj.k.first().map_or(0, |k| k.len());
    let m = traj.q.first().map_or(0, |q| q.len());
    let mut x = DMatrix::zeros(traj.horizon, n + m);
    for t in 0..traj.horizon {
        for j in 0..n {
            x[(t, j)] = traj.k[t][j];
        }
        for j in 0..m {
            x[(t, n + j)] = traj.q[t][j];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RuleKind;
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn desk1() -> ModelSpec {
        ModelSpec {
            n: 1,
            m: 1,
            beta: 0.99,
            rho: 1.0,
            a: DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 1.2]),
            b: DMatrix::from_column_slice(2, 1, &[0.5, 1.0]),
            q: DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 0.5]),
            gamma: None,
            z_path: None,
            k_star: DVector::from_element(1, 1.0),
            q_star: DVector::from_element(1, 1.0),
            r_star: 0.0,
            var_names: Some(vec!["k".into(), "q".into()]),
        }
    }

    fn diagonal_model(k_pole: f64, q_pole: f64, beta: f64) -> ModelSpec {
        ModelSpec {
            n: 1,
            m: 1,
            beta,
            rho: 1.0,
            a: DMatrix::from_row_slice(2, 2, &[k_pole, 0.0, 0.0, q_pole]),
            b: DMatrix::from_column_slice(2, 1, &[0.0, 0.0]),
            q: DMatrix::identity(2, 2),
            gamma: None,
            z_path: None,
            k_star: DVector::from_element(1, 1.0),
            q_star: DVector::from_element(1, 1.0),
            r_star: 0.0,
            var_names: None,
        }
    }

    #[test]
    fn zero_law_pays_only_the_instantaneous_loss() {
        let model = diagonal_model(0.0, 0.0, 1.0);
        let law = SimLaw::full(&model, &PolicyRule::zero(1, 1));
        let y0 = DVector::from_vec(vec![2.0, 0.0]);
        let traj = simulate(&model, &law, &y0, 10, &tol()).unwrap();
        assert_relative_eq!(traj.discounted_loss, 4.0, epsilon = 1e-12);
        assert!(traj.k[1].norm() < 1e-300);
    }

    #[test]
    fn geometric_decay_has_log_growth_exponent() {
        let model = diagonal_model(0.5, 0.0, 1.0);
        let law = SimLaw::full(&model, &PolicyRule::zero(1, 1));
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let traj = simulate(&model, &law, &y0, 200, &tol()).unwrap();
        assert_relative_eq!(traj.growth_exponent, 0.5f64.ln(), epsilon = 1e-9);
        for (t, k) in traj.k.iter().enumerate().take(20) {
            assert_relative_eq!(k[0], 0.5f64.powi(t as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn boundedness_thresholds() {
        let tol = tol();
        let decay = simulate(
            &diagonal_model(0.5, 0.0, 1.0),
            &SimLaw::full(&diagonal_model(0.5, 0.0, 1.0), &PolicyRule::zero(1, 1)),
            &DVector::from_vec(vec![1.0, 0.0]),
            100,
            &tol,
        )
        .unwrap();
        assert!(
            check_boundedness(&decay, 1.0, &tol)
                .unwrap()
                .bound_satisfied
        );

        let grow = simulate(
            &diagonal_model(1.2, 0.0, 1.0),
            &SimLaw::full(&diagonal_model(1.2, 0.0, 1.0), &PolicyRule::zero(1, 1)),
            &DVector::from_vec(vec![1.0, 0.0]),
            100,
            &tol,
        )
        .unwrap();
        assert!(!check_boundedness(&grow, 1.0, &tol).unwrap().bound_satisfied);

        // 1.01 growth clears the beta = 0.9 threshold 1/sqrt(0.9) ~ 1.054
        let slow = simulate(
            &diagonal_model(1.01, 0.0, 0.9),
            &SimLaw::full(&diagonal_model(1.01, 0.0, 0.9), &PolicyRule::zero(1, 1)),
            &DVector::from_vec(vec![1.0, 0.0]),
            100,
            &tol,
        )
        .unwrap();
        let report = check_boundedness(&slow, 0.9, &tol).unwrap();
        assert!(report.bound_satisfied);
        assert_relative_eq!(report.growth_exponent, 1.01f64.ln(), epsilon = 1e-9);

        let short = simulate(
            &diagonal_model(0.5, 0.0, 1.0),
            &SimLaw::full(&diagonal_model(0.5, 0.0, 1.0), &PolicyRule::zero(1, 1)),
            &DVector::from_vec(vec![1.0, 0.0]),
            10,
            &tol,
        )
        .unwrap();
        assert!(check_boundedness(&short, 1.0, &tol).is_err());
    }

    #[test]
    fn divergent_paths_are_truncated_and_flagged() {
        let model = diagonal_model(10.0, 0.0, 1.0);
        let law = SimLaw::full(&model, &PolicyRule::zero(1, 1));
        let traj = simulate(
            &model,
            &law,
            &DVector::from_vec(vec![1.0, 0.0]),
            100,
            &tol(),
        )
        .unwrap();
        assert!(traj.divergent);
        assert!(traj.horizon < 100);
    }

    #[test]
    fn simulation_is_linear_in_the_initial_state() {
        let model = desk1();
        let sol = commitment::solve_commitment(&model, &tol()).unwrap();
        let law = SimLaw::commitment(&sol);
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let base = simulate(&model, &law, &y0, 50, &tol()).unwrap();
        let scaled = simulate(&model, &law, &(&y0 * 3.0), 50, &tol()).unwrap();
        for t in 0..50 {
            assert_relative_eq!(scaled.k[t][0], 3.0 * base.k[t][0], epsilon = 1e-10);
            assert_relative_eq!(scaled.r[t], 3.0 * base.r[t], epsilon = 1e-10);
        }
    }

    #[test]
    fn commitment_loss_matches_the_quadratic_form() {
        let model = desk1();
        let sol = commitment::solve_commitment(&model, &tol()).unwrap();
        let k0 = DVector::from_vec(vec![1.0]);
        let mut initial = DVector::zeros(2);
        initial.rows_mut(0, 1).copy_from(&k0);
        let traj = simulate(&model, &SimLaw::commitment(&sol), &initial, 3000, &tol()).unwrap();
        assert_relative_eq!(traj.discounted_loss, sol.loss_from_k0(&k0), epsilon = 1e-6);
    }

    #[test]
    fn bellman_additivity_along_the_commitment_path() {
        let model = desk1();
        let sol = commitment::solve_commitment(&model, &tol()).unwrap();
        let k0 = DVector::from_vec(vec![1.0]);
        let mut initial = DVector::zeros(2);
        initial.rows_mut(0, 1).copy_from(&k0);
        let horizon = 40usize;
        let traj = simulate(
            &model,
            &SimLaw::commitment(&sol),
            &initial,
            horizon as u64 + 1,
            &tol(),
        )
        .unwrap();
        // loss over [0, T) plus the discounted continuation value at T
        let mut partial = 0.0;
        for t in 0..horizon {
            let y = traj.y(t);
            partial += model.beta.powi(t as i32)
                * ((y.transpose() * &model.q * &y)[0] + model.rho * traj.r[t] * traj.r[t]);
        }
        let tail = model.beta.powi(horizon as i32)
            * crate::riccati::loss_of_state(&sol.p, &traj.y(horizon));
        assert_relative_eq!(partial + tail, sol.loss_from_k0(&k0), epsilon = 1e-8);
    }

    #[test]
    fn bk_identification_equates_rules_and_drops_rank() {
        let model = desk1();
        let rule_a = PolicyRule::from_slice(&[0.0], &[1.0], RuleKind::AdHoc);
        let manifold = bk::select_manifold(&model, &rule_a, &tol()).unwrap();
        let report = identification_experiment_bk(
            &model,
            &rule_a,
            &manifold.n_matrix,
            &DVector::from_vec(vec![1.0]),
            200,
            &tol(),
        )
        .unwrap();
        assert!(report.equivalent, "r gap {}", report.r_max_diff);
        assert!(report.r_max_diff < 1e-10);
        assert_eq!(report.regressor_rank, 1);
        assert_eq!(report.rank_deficiency, 1);
        assert_relative_eq!(
            report.restricted_rule.f_k[0],
            -manifold.n_matrix[(0, 0)],
            epsilon = 1e-12
        );
    }

    #[test]
    fn manifold_is_invariant_step_by_step() {
        // One application of the full closed loop from each on-manifold
        // point lands back on the manifold: E_t q_{t+1} = -N k_{t+1}.
        let model = desk1();
        let manifold = bk::select_manifold(&model, &PolicyRule::zero(1, 1), &tol()).unwrap();
        let g = model.closed_loop(&PolicyRule::zero(1, 1));
        let reduced = SimLaw::Reduced {
            transition: manifold.a_reduced.clone(),
            gain: RowDVector::zeros(1),
            n_matrix: manifold.n_matrix.clone(),
        };
        let traj = simulate(&model, &reduced, &DVector::from_vec(vec![1.0]), 100, &tol()).unwrap();
        for t in 0..traj.horizon {
            let stepped = &g * traj.y(t);
            let k_next = stepped.rows(0, 1).into_owned();
            let q_next = stepped.rows(1, 1).into_owned();
            let residual = (&q_next + &manifold.n_matrix * &k_next).abs().max();
            assert!(residual < 1e-8, "left the manifold at t={t}: {residual}");
            // the top half of the full step is the reduced step
            if t + 1 < traj.horizon {
                let gap = (&k_next - &traj.k[t + 1]).abs().max();
                assert!(gap < 1e-8, "top halves disagree at t={t}: {gap}");
            }
        }
    }

    #[test]
    fn free_running_the_saddle_stays_on_manifold_over_short_horizons() {
        // Free-running the full loop drifts off the manifold at the rate
        // of the unstable root; within 50 periods the drift stays far
        // below tolerance.
        let model = desk1();
        let manifold = bk::select_manifold(&model, &PolicyRule::zero(1, 1), &tol()).unwrap();
        let mut y0 = DVector::zeros(2);
        y0[0] = 1.0;
        y0[1] = -manifold.n_matrix[(0, 0)];
        let traj = simulate(
            &model,
            &SimLaw::full(&model, &PolicyRule::zero(1, 1)),
            &y0,
            50,
            &tol(),
        )
        .unwrap();
        for t in 0..traj.horizon {
            let residual = (&traj.q[t] + &manifold.n_matrix * &traj.k[t]).abs().max();
            assert!(residual < 1e-8, "left the manifold at t={t}: {residual}");
        }
    }

    #[test]
    fn restricted_rule_is_trivially_equivalent_to_itself() {
        let model = desk1();
        let rule = PolicyRule::from_slice(&[0.3], &[0.0], RuleKind::AdHoc);
        let manifold = bk::select_manifold(&model, &rule, &tol()).unwrap();
        let report = identification_experiment_bk(
            &model,
            &rule,
            &manifold.n_matrix,
            &DVector::from_vec(vec![1.0]),
            200,
            &tol(),
        )
        .unwrap();
        assert_eq!(report.r_max_diff, 0.0);
        assert_eq!(report.regressor_rank, 1);
    }

    #[test]
    fn perturbed_weights_yield_a_distinguishable_phi() {
        let model = desk1();
        let mut perturbed = model.clone();
        perturbed.q[(0, 1)] += 0.1;
        perturbed.q[(1, 0)] += 0.1;
        let base = commitment::solve_commitment(&model, &tol()).unwrap();
        let other = commitment::solve_commitment(&perturbed, &tol()).unwrap();
        let k0 = DVector::from_vec(vec![1.0]);
        let rec_base =
            identification_experiment_commitment(&model, &base, &k0, 500, 42, &tol()).unwrap();
        let rec_other =
            identification_experiment_commitment(&perturbed, &other, &k0, 500, 42, &tol()).unwrap();
        let gap = (&rec_base.recovered_phi - &rec_other.recovered_phi)
            .abs()
            .max();
        assert!(gap > 1e-6, "recovered rules indistinguishable: {gap:.3e}");
    }

    #[test]
    fn commitment_identification_recovers_phi() {
        let model = desk1();
        let sol = commitment::solve_commitment(&model, &tol()).unwrap();
        let report = identification_experiment_commitment(
            &model,
            &sol,
            &DVector::from_vec(vec![1.0]),
            500,
            42,
            &tol(),
        )
        .unwrap();
        assert!(report.identified, "error {}", report.max_coefficient_error);
        assert!(report.max_coefficient_error < 1e-6);
        assert_eq!(report.regressor_rank, 2);
        assert!(!report.retried);
    }

    #[test]
    fn zero_k0_is_refused() {
        let model = desk1();
        let sol = commitment::solve_commitment(&model, &tol()).unwrap();
        let err =
            identification_experiment_commitment(&model, &sol, &DVector::zeros(1), 500, 42, &tol())
                .unwrap_err();
        assert!(matches!(err, AnalysisError::Refused(_)));
    }

    #[test]
    fn covariance_contrast_moves_only_the_commitment_relation() {
        let model = desk1();
        let report =
            covariance_comparison(&model, &DVector::from_vec(vec![1.0]), 500, 0.1, &tol()).unwrap();
        assert!(report.n_gap < 1e-10);
        assert!(report.bk_cross_gap > 0.0); // scale S moves, the map does not
        assert!(report.commitment_cross_gap > 1e-6);
    }

    #[test]
    fn zero_perturbation_collapses_the_contrast() {
        let model = desk1();
        let report =
            covariance_comparison(&model, &DVector::from_vec(vec![1.0]), 200, 0.0, &tol()).unwrap();
        assert!(report.n_gap == 0.0);
        assert!(report.bk_cross_gap < 1e-14);
        assert!(report.commitment_cross_gap < 1e-14);
    }

    #[test]
    fn exogenous_path_enters_full_law_simulation_only() {
        // Rule parameters never depend on z (certainty equivalence); the
        // term shows up in the simulated path alone.
        let mut model = diagonal_model(0.5, 0.0, 1.0);
        model.gamma = Some(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
        model.z_path = Some((0..10).map(|_| DVector::from_vec(vec![0.25])).collect());

        let law = SimLaw::full(&model, &PolicyRule::zero(1, 1));
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let traj = simulate(&model, &law, &y0, 10, &tol()).unwrap();
        // k_{t+1} = 0.5 k_t + 0.25
        let mut expected = 1.0;
        for t in 0..10 {
            assert_relative_eq!(traj.k[t][0], expected, epsilon = 1e-12);
            expected = 0.5 * expected + 0.25;
        }

        // same model, homogeneous solver path: gamma is not consulted
        let mut homogeneous = model.clone();
        homogeneous.gamma = None;
        homogeneous.z_path = None;
        let with = crate::bk::select_manifold(&model, &PolicyRule::zero(1, 1), &tol()).unwrap();
        let without =
            crate::bk::select_manifold(&homogeneous, &PolicyRule::zero(1, 1), &tol()).unwrap();
        assert_eq!(with.n_matrix, without.n_matrix);

        // a path shorter than the horizon is a hard error
        let err = simulate(&model, &law, &y0, 11, &tol()).unwrap_err();
        assert!(matches!(err, AnalysisError::ExogenousTooShort { .. }));
    }

    #[test]
    fn full_law_steps_satisfy_the_transition_exactly() {
        let model = desk1();
        let rule = PolicyRule::from_slice(&[0.3], &[0.1], RuleKind::AdHoc);
        let law = SimLaw::full(&model, &rule);
        let g = model.closed_loop(&rule);
        let y0 = DVector::from_vec(vec![1.0, -0.2]);
        let traj = simulate(&model, &law, &y0, 40, &tol()).unwrap();
        for t in 0..traj.horizon - 1 {
            let step = &g * traj.y(t) - traj.y(t + 1);
            assert!(step.abs().max() < 1e-10, "law violated at t={t}");
        }
    }

    #[test]
    fn csv_has_header_and_pinned_digits() {
        let model = desk1();
        let sol = commitment::solve_commitment(&model, &tol()).unwrap();
        let traj = simulate(
            &model,
            &SimLaw::commitment(&sol),
            &DVector::from_vec(vec![1.0, 0.0]),
            5,
            &tol(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &model.labels(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,k,q,mu_q,r");
        assert_eq!(lines.clone().count(), 5);
        assert!(lines.next().unwrap().starts_with("0,1.0000000000000000e0,"));
    }
}
