//! Blanchard-Kahn solutions: case classification, the saddle-path matrix
//! N, enumeration of multiple equilibria, and the reduced quasi-optimal
//! problem.
//!
//! Under a rule restricted to predetermined variables the equilibrium
//! places the jump variables on a stable manifold `q = -N k` with
//! `N = M_mm^{-1} M_mn` built from the left-eigenvector rows attached to
//! a choice of `n` stable eigenvalues. When more than `n` eigenvalues are
//! stable, every admissible choice yields its own manifold; the
//! enumeration here surfaces that indeterminacy instead of silently
//! picking one.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{BkError, RiccatiError};
use crate::model::{ModelSpec, PolicyRule, RuleKind};
use crate::riccati::{solve_dare, RiccatiSolution};
use crate::spectral::{self, SpectralSplit};

/// The three Blanchard-Kahn cases: fewer stable eigenvalues than
/// predetermined variables, exactly as many, or more.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BkCase {
    NoEquilibrium,
    Unique,
    Multiple,
}

/// One Blanchard-Kahn equilibrium for a chosen stable subset.
#[derive(Clone, Debug)]
pub struct BkSolution {
    pub case: BkCase,
    /// Indices (into the sorted spectrum) of the n stable eigenvalues
    /// spanning the saddle manifold.
    pub subset: Vec<usize>,
    /// Saddle-path matrix in `q = -N k`, m x n.
    pub n_matrix: DMatrix<f64>,
    /// Reduced transition A'_nn = A_nn - A_nm N.
    pub a_reduced: DMatrix<f64>,
    /// Reduced loss weights Q'_nn = Q_nn + N' Q_mm N + Q_nm N + N' Q_mn.
    pub q_reduced: DMatrix<f64>,
    /// Condition number of M_mm for this subset.
    pub conditioning: f64,
    /// Max-norm residual of the invariant-manifold identity.
    pub manifold_residual: f64,
}

/// Why a candidate subset was rejected during enumeration.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SubsetRejection {
    /// M_mm too ill-conditioned to invert.
    SingularMmm { condition: f64 },
    /// The subset separates a complex-conjugate pair; N would be complex.
    ConjugatePairSplit,
    /// N came out complex despite a conjugate-closed subset.
    ComplexN { residual: f64 },
    /// The manifold identity failed to verify.
    ManifoldResidual { residual: f64 },
}

impl std::fmt::Display for SubsetRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubsetRejection::SingularMmm { condition } => {
                write!(f, "M_mm numerically singular (condition {condition:.3e})")
            }
            SubsetRejection::ConjugatePairSplit => {
                write!(
                    f,
                    "complex solution — conjugate pair split across stable set"
                )
            }
            SubsetRejection::ComplexN { residual } => {
                write!(f, "N not real (imaginary residual {residual:.3e})")
            }
            SubsetRejection::ManifoldResidual { residual } => {
                write!(
                    f,
                    "invariant-manifold identity violated (residual {residual:.3e})"
                )
            }
        }
    }
}

/// A rejected subset together with the reason.
#[derive(Clone, Debug)]
pub struct RejectedSubset {
    pub subset: Vec<usize>,
    pub reason: SubsetRejection,
}

/// Every admissible equilibrium of a restricted rule, plus the rejects.
/// `solutions.len() + rejected.len()` always equals `count_formula`.
#[derive(Clone, Debug)]
pub struct EquilibriumSet {
    pub case: BkCase,
    /// binomial(n_S, n): number of candidate subsets.
    pub count_formula: u64,
    /// binomial(n+m, n): the loosest bound on the count.
    pub upper_bound: u64,
    pub solutions: Vec<BkSolution>,
    pub rejected: Vec<RejectedSubset>,
    /// Smallest pairwise max-norm gap between admissible N matrices.
    pub min_n_gap: Option<f64>,
}

/// The reduced quasi-optimal problem and its solution.
#[derive(Clone, Debug)]
pub struct QuasiOptimalSolution {
    pub a_reduced: DMatrix<f64>,
    pub q_reduced: DMatrix<f64>,
    /// Reduced Riccati solution: P' and F'_1n.
    pub riccati: RiccatiSolution,
    /// The restricted rule (F'_1n, 0_1m).
    pub rule: PolicyRule,
}

/// Forms the closed loop A - BF and classifies it against the number of
/// predetermined variables.
pub fn classify_bk(
    model: &ModelSpec,
    rule: &PolicyRule,
    tol: &Tolerances,
) -> Result<(BkCase, SpectralSplit), BkError> {
    let closed = model.closed_loop(rule);
    let split = spectral::spectral_split(&closed, model.beta, tol)?;
    let case = if split.n_s < model.n {
        BkCase::NoEquilibrium
    } else if split.n_s == model.n {
        BkCase::Unique
    } else {
        BkCase::Multiple
    };
    Ok((case, split))
}

/// A'_nn and Q'_nn for a given saddle matrix.
pub fn reduced_problem(model: &ModelSpec, n_matrix: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let a_reduced = model.a_nn() - model.a_nm() * n_matrix;
    let q_reduced = model.q_nn()
        + n_matrix.transpose() * model.q_mm() * n_matrix
        + model.q_nm() * n_matrix
        + n_matrix.transpose() * model.q_mn();
    (a_reduced, q_reduced)
}

/// Builds N = M_mm^{-1} M_mn for one choice of n stable eigenvalues,
/// verifying realness, conditioning and the invariant-manifold identity.
pub fn build_n(
    model: &ModelSpec,
    split: &SpectralSplit,
    subset: &[usize],
    tol: &Tolerances,
) -> Result<BkSolution, BkError> {
    let case = case_of(split.n_s, model.n, model.m);
    build_n_inner(model, split, subset, case, tol).map_err(|reason| BkError::RejectedSubset {
        subset: subset.to_vec(),
        reason: reason.to_string(),
    })
}

fn case_of(n_s: usize, n: usize, m: usize) -> BkCase {
    if n_s < n {
        BkCase::NoEquilibrium
    } else if n_s == n {
        BkCase::Unique
    } else {
        debug_assert!(n_s <= n + m);
        BkCase::Multiple
    }
}

fn build_n_inner(
    model: &ModelSpec,
    split: &SpectralSplit,
    subset: &[usize],
    case: BkCase,
    tol: &Tolerances,
) -> Result<BkSolution, SubsetRejection> {
    let (n, m) = (model.n, model.m);
    let d = n + m;
    assert_eq!(subset.len(), n, "subset must select n stable eigenvalues");
    assert!(
        subset.iter().all(|&i| i < split.n_s),
        "subset must index stable eigenvalues"
    );

    // A subset separating a conjugate pair cannot produce a real N.
    let scale = split
        .eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(0.0f64, f64::max);
    let conj_tol = (tol.distinctness * scale).max(1e-12);
    for &i in subset {
        let lambda = split.eigenvalues[i];
        if lambda.im.abs() > conj_tol {
            let partner_inside = subset
                .iter()
                .any(|&j| j != i && (split.eigenvalues[j] - lambda.conj()).norm() <= conj_tol);
            if !partner_inside {
                return Err(SubsetRejection::ConjugatePairSplit);
            }
        }
    }

    let complement: Vec<usize> = (0..d).filter(|i| !subset.contains(i)).collect();
    debug_assert_eq!(complement.len(), m);
    let mut bottom = DMatrix::zeros(m, d);
    for (row, &i) in complement.iter().enumerate() {
        bottom.row_mut(row).copy_from(&split.m.row(i));
    }
    let m_mn = bottom.view((0, 0), (m, n)).into_owned();
    let m_mm = bottom.view((0, n), (m, m)).into_owned();

    let conditioning = spectral::condition_number(&m_mm);
    if !conditioning.is_finite() || conditioning > tol.condition_max {
        return Err(SubsetRejection::SingularMmm {
            condition: conditioning,
        });
    }
    let lu = m_mm.lu();
    let n_complex = match lu.solve(&m_mn) {
        Some(x) => x,
        None => {
            return Err(SubsetRejection::SingularMmm {
                condition: conditioning,
            })
        }
    };
    let n_matrix =
        spectral::to_real_checked(&n_complex, tol.imag_residual).map_err(|e| match e {
            crate::error::SpectralError::ComplexResidual { residual } => {
                SubsetRejection::ComplexN { residual }
            }
            _ => SubsetRejection::ComplexN { residual: f64::NAN },
        })?;

    // Invariant manifold: G_mn - G_mm N + N G_nn - N G_nm N = 0 restricted
    // to q = -N k, i.e. N solves the non-symmetric Riccati equation.
    let manifold_residual = manifold_residual(&split.matrix, &n_matrix, n, m);
    if manifold_residual > tol.manifold {
        return Err(SubsetRejection::ManifoldResidual {
            residual: manifold_residual,
        });
    }

    let (a_reduced, q_reduced) = reduced_problem(model, &n_matrix);
    Ok(BkSolution {
        case,
        subset: subset.to_vec(),
        n_matrix,
        a_reduced,
        q_reduced,
        conditioning,
        manifold_residual,
    })
}

/// Residual of the non-symmetric Riccati identity that characterizes an
/// invariant manifold `q = -N k` of the closed-loop matrix `g`.
pub fn manifold_residual(g: &DMatrix<f64>, n_matrix: &DMatrix<f64>, n: usize, m: usize) -> f64 {
    let g_nn = g.view((0, 0), (n, n)).into_owned();
    let g_nm = g.view((0, n), (n, m)).into_owned();
    let g_mn = g.view((n, 0), (m, n)).into_owned();
    let g_mm = g.view((n, n), (m, m)).into_owned();
    (g_mn - &g_mm * n_matrix + n_matrix * &g_nn - n_matrix * g_nm * n_matrix)
        .abs()
        .max()
}

/// Enumerates all `binomial(n_S, n)` candidate stable subsets of a
/// restricted rule in lexicographic index order, returning every
/// admissible equilibrium and every rejection.
pub fn enumerate_equilibria(
    model: &ModelSpec,
    rule: &PolicyRule,
    tol: &Tolerances,
) -> Result<EquilibriumSet, BkError> {
    if !rule.is_restricted() {
        return Err(BkError::RuleNotRestricted);
    }
    enumerate_unchecked(model, rule, tol)
}

/// Enumeration without the restricted-rule gate; the eigenstructure
/// construction itself works for any closed loop, which the analyze
/// pipeline uses to exhibit the indeterminacy of over-stable augmented
/// rules.
pub(crate) fn enumerate_unchecked(
    model: &ModelSpec,
    rule: &PolicyRule,
    tol: &Tolerances,
) -> Result<EquilibriumSet, BkError> {
    let (case, split) = classify_bk(model, rule, tol)?;
    if case == BkCase::NoEquilibrium {
        return Err(BkError::NoEquilibrium {
            stable: split.n_s,
            predetermined: model.n,
        });
    }
    let count_formula = binomial(split.n_s as u64, model.n as u64);
    let upper_bound = binomial((model.n + model.m) as u64, model.n as u64);

    let mut solutions = Vec::new();
    let mut rejected = Vec::new();
    for subset in combinations(split.n_s, model.n) {
        match build_n_inner(model, &split, &subset, case, tol) {
            Ok(sol) => solutions.push(sol),
            Err(reason) => rejected.push(RejectedSubset { subset, reason }),
        }
    }
    debug_assert_eq!(
        solutions.len() as u64 + rejected.len() as u64,
        count_formula
    );

    let mut min_n_gap = None;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let gap = (&solutions[i].n_matrix - &solutions[j].n_matrix)
                .abs()
                .max();
            min_n_gap = Some(min_n_gap.map_or(gap, |g: f64| g.min(gap)));
        }
    }

    Ok(EquilibriumSet {
        case,
        count_formula,
        upper_bound,
        solutions,
        rejected,
        min_n_gap,
    })
}

/// Solves the reduced problem (A', B_n1, Q') for the quasi-optimal rule
/// (F'_1n, 0_1m) on a given saddle matrix.
pub fn solve_quasi_optimal(
    model: &ModelSpec,
    n_matrix: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<QuasiOptimalSolution, BkError> {
    let (a_reduced, q_reduced) = reduced_problem(model, n_matrix);
    let b_n = model.b_n();
    let riccati = match solve_dare(&a_reduced, &b_n, &q_reduced, model.rho, model.beta, tol) {
        Ok(r) => r,
        Err(RiccatiError::NotControllable { report }) => {
            return Err(BkError::ReducedNotControllable { report })
        }
        Err(e) => return Err(BkError::Riccati(e)),
    };
    let rule = PolicyRule::new(
        riccati.f.clone(),
        RowDVector::zeros(model.m),
        RuleKind::QuasiOptimal,
    );
    Ok(QuasiOptimalSolution {
        a_reduced,
        q_reduced,
        riccati,
        rule,
    })
}

/// Restricts a rule to predetermined variables without changing the
/// instrument path on the manifold: (F_1n, F_1m) -> (F_1n - F_1m N, 0).
pub fn observational_equivalence(rule: &PolicyRule, n_matrix: &DMatrix<f64>) -> PolicyRule {
    let f_k = &rule.f_k - &rule.f_q * n_matrix;
    PolicyRule::new(f_k, RowDVector::zeros(rule.f_q.ncols()), rule.kind)
}

/// The equilibrium manifold a simulation pipeline should use for a rule:
/// the unique one in case 2, the first admissible one (deterministic
/// lexicographic order) in case 3, a refusal in case 1.
pub fn select_manifold(
    model: &ModelSpec,
    rule: &PolicyRule,
    tol: &Tolerances,
) -> Result<BkSolution, BkError> {
    let (case, split) = classify_bk(model, rule, tol)?;
    match case {
        BkCase::NoEquilibrium => Err(BkError::NoEquilibrium {
            stable: split.n_s,
            predetermined: model.n,
        }),
        BkCase::Unique => build_n(model, &split, &(0..model.n).collect::<Vec<_>>(), tol),
        BkCase::Multiple => {
            let mut candidates = 0;
            let mut last = String::new();
            for subset in combinations(split.n_s, model.n) {
                match build_n_inner(model, &split, &subset, case, tol) {
                    Ok(sol) => return Ok(sol),
                    Err(reason) => {
                        candidates += 1;
                        last = reason.to_string();
                    }
                }
            }
            Err(BkError::NoAdmissibleManifold { candidates, last })
        }
    }
}

/// binomial(n, k) in u64; small arguments only.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in (i + 1)..k {
            current[j] = current[j - 1] + 1;
        }
    }
}
