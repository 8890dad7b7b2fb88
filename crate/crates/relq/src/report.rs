//! The machine-readable analysis report and the pipeline that fills it.
//!
//! Reports serialize with a fixed key order (struct declaration order)
//! and 17-significant-digit floats, so re-running the same model file
//! with the same configuration reproduces the bytes exactly. Sections
//! fail independently: a refusal in one (say, an uncontrollable
//! commitment problem) still leaves the others populated, and the worst
//! section status decides the process exit code.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis;
use crate::bk::{self, BkCase};
use crate::commitment::{self, CommitmentSolution};
use crate::config::Tolerances;
use crate::error::{AnalysisError, BkError, CommitmentError, RelqError};
use crate::model::{validate_model, DeviationMode, ModelSpec, PolicyRule, RuleKind};
use crate::spectral::ControllabilityReport;

pub const SCHEMA_VERSION: u32 = 1;

/// Default seed for the degenerate-start retry perturbation; everything
/// else in the pipeline is deterministic.
pub const DEFAULT_SEED: u64 = 42;

/// A report section that either carries data or records why it could
/// not be produced, with the module that said so.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T: Serialize> {
    Ok { data: T },
    Refused { module: String, reason: String },
    Error { module: String, reason: String },
}

impl<T: Serialize> Section<T> {
    fn from_result<E: std::fmt::Display + Into<RelqError>>(
        result: Result<T, E>,
        module: &str,
    ) -> Self {
        match result {
            Ok(data) => Section::Ok { data },
            Err(e) => {
                let reason = e.to_string();
                let e: RelqError = e.into();
                if e.is_refusal() {
                    Section::Refused {
                        module: module.to_string(),
                        reason,
                    }
                } else {
                    Section::Error {
                        module: module.to_string(),
                        reason,
                    }
                }
            }
        }
    }

    fn status_code(&self) -> i32 {
        match self {
            Section::Ok { .. } => 0,
            Section::Refused { .. } => 2,
            Section::Error { .. } => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

fn cpx(c: &Complex<f64>) -> ComplexJson {
    ComplexJson { re: c.re, im: c.im }
}

fn spectrum(eigs: &[Complex<f64>]) -> Vec<ComplexJson> {
    eigs.iter().map(cpx).collect()
}

fn mat(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RuleJson {
    pub f_k: Vec<f64>,
    pub f_q: Vec<f64>,
    pub kind: RuleKind,
}

/// JSON form of a rule.
pub fn rule_json_of(rule: &PolicyRule) -> RuleJson {
    RuleJson {
        f_k: rule.f_k.iter().copied().collect(),
        f_q: rule.f_q.iter().copied().collect(),
        kind: rule.kind,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSection {
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub rho: f64,
    pub r_star: f64,
    pub var_names: Vec<String>,
    pub deviation_modes: Vec<DeviationMode>,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControllabilitySection {
    pub full_system: ControllabilityReport,
    /// Rank test of the reduced pair (A', B_n1) on the open-loop saddle
    /// manifold, when one exists.
    pub reduced_system: Section<ControllabilityReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiOptimalJson {
    pub p_reduced: Vec<Vec<f64>>,
    pub f_reduced: Vec<f64>,
    pub closed_loop_spectrum: Vec<ComplexJson>,
    pub riccati_residual: f64,
    pub riccati_iterations: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumJson {
    pub subset: Vec<usize>,
    pub n_matrix: Vec<Vec<f64>>,
    pub conditioning: f64,
    pub manifold_residual: f64,
    /// Eq-10 restriction of the analyzed rule on this manifold.
    pub restricted_rule: Vec<f64>,
    /// Reduced Riccati solve for this manifold.
    pub quasi_optimal: Section<QuasiOptimalJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RejectedJson {
    pub subset: Vec<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BkBody {
    pub case: BkCase,
    pub stable_count: usize,
    pub unit_stable_count: usize,
    pub threshold: f64,
    pub borderline: Vec<usize>,
    pub closed_loop_spectrum: Vec<ComplexJson>,
    pub count_formula: u64,
    pub upper_bound: u64,
    pub indeterminacy_warning: bool,
    pub equilibria: Vec<EquilibriumJson>,
    pub rejected: Vec<RejectedJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BkEntry {
    pub rule: RuleJson,
    pub result: Section<BkBody>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryRuleJson {
    pub psi_r: f64,
    pub psi_k0: Vec<f64>,
    pub psi_k1: Vec<f64>,
    pub parameter_count: usize,
    pub identified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommitmentJson {
    pub p: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub q0_map: Vec<Vec<f64>>,
    pub t_closed: Vec<Vec<f64>>,
    pub p_mm_condition: f64,
    pub closed_loop_spectrum: Vec<ComplexJson>,
    pub foc_residual_r: f64,
    pub foc_residual_y: f64,
    pub riccati_residual: f64,
    pub riccati_iterations: u64,
    pub history_rule: Section<HistoryRuleJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BkIdentificationJson {
    pub rule: RuleJson,
    pub restricted_rule: Vec<f64>,
    pub r_max_diff: f64,
    pub equivalent: bool,
    pub regressor_rank: usize,
    pub expected_rank: usize,
    pub rank_deficiency: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommitmentIdentificationJson {
    pub recovered_phi: Vec<f64>,
    pub expected_phi: Vec<f64>,
    pub max_coefficient_error: f64,
    pub identified: bool,
    pub regressor_rank: usize,
    pub retried: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceJson {
    pub perturbation: f64,
    pub n_gap: f64,
    pub bk_cross_base: Vec<Vec<f64>>,
    pub bk_cross_perturbed: Vec<Vec<f64>>,
    pub bk_cross_gap: f64,
    pub commitment_cross_base: Vec<Vec<f64>>,
    pub commitment_cross_perturbed: Vec<Vec<f64>>,
    pub commitment_cross_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentsSection {
    pub identification_bk: Section<BkIdentificationJson>,
    pub identification_commitment: Section<CommitmentIdentificationJson>,
    pub covariance: Section<CovarianceJson>,
}

/// The self-contained analyze report.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub model_digest: String,
    pub model: ModelSection,
    pub controllability: ControllabilitySection,
    pub bk: Vec<BkEntry>,
    pub commitment: Section<CommitmentJson>,
    pub experiments: ExperimentsSection,
    pub config: Tolerances,
}

impl AnalysisReport {
    /// JSON with pinned formatting; byte-identical across reruns.
    pub fn to_json(&self) -> String {
        crate::jsonfmt::to_string_pinned(self)
    }

    /// Worst section status: 0 all complete, 2 refusal, 1 error.
    pub fn exit_code(&self) -> i32 {
        let mut worst = 0;
        let mut bump = |code: i32| {
            // error (1) dominates refusal (2) dominates success (0)
            worst = match (worst, code) {
                (1, _) | (_, 1) => 1,
                (2, _) | (_, 2) => 2,
                _ => worst.max(code),
            };
        };
        bump(self.controllability.reduced_system.status_code());
        for entry in &self.bk {
            bump(entry.result.status_code());
        }
        bump(self.commitment.status_code());
        bump(self.experiments.identification_bk.status_code());
        bump(self.experiments.identification_commitment.status_code());
        bump(self.experiments.covariance.status_code());
        worst
    }
}

/// Pipeline inputs beyond the model itself.
#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    /// Ad hoc rules to classify alongside the commitment-implied one;
    /// each row carries n + m coefficients.
    pub rules: Vec<PolicyRule>,
    pub horizon: u64,
    /// Initial predetermined deviations for the experiments (ones when
    /// absent).
    pub k0: Option<DVector<f64>>,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            horizon: Tolerances::default().default_horizon,
            k0: None,
            seed: DEFAULT_SEED,
        }
    }
}

/// SHA-256 of the canonical model serialization.
pub fn model_digest(model: &ModelSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.canonical_json().as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the full pipeline: validation, controllability, commitment,
/// Blanchard-Kahn classification of the commitment-implied and
/// user-supplied rules, and the identification and covariance
/// experiments.
pub fn analyze(model: &ModelSpec, opts: &AnalyzeOptions, tol: &Tolerances) -> AnalysisReport {
    let validation = validate_model(model, tol);
    let model_section = ModelSection {
        n: model.n,
        m: model.m,
        beta: model.beta,
        rho: model.rho,
        r_star: model.r_star,
        var_names: model.labels(),
        deviation_modes: validation.deviation_modes.clone(),
        violations: validation.violations.clone(),
    };

    let k0 = opts
        .k0
        .clone()
        .unwrap_or_else(|| DVector::from_element(model.n, 1.0));

    let full_system = crate::spectral::controllability(&model.a, &model.b, tol)
        .expect("validated model has consistent dimensions");

    // Open-loop saddle manifold: basis for the reduced rank test and the
    // covariance experiment.
    let open_rule = PolicyRule::zero(model.n, model.m);
    let baseline_manifold = bk::select_manifold(model, &open_rule, tol);
    let reduced_system = Section::from_result(
        baseline_manifold
            .as_ref()
            .map_err(clone_bk_error)
            .and_then(|manifold| {
                crate::spectral::controllability(&manifold.a_reduced, &model.b_n(), tol)
                    .map_err(BkError::Spectral)
            }),
        "bk_solver",
    );

    let commitment_solution = commitment::solve_commitment(model, tol);
    let commitment_section = match &commitment_solution {
        Ok(sol) => Section::Ok {
            data: commitment_json(sol, model, tol),
        },
        Err(e) => Section::from_result(
            Err::<CommitmentJson, _>(clone_commitment_error(e)),
            "commitment",
        ),
    };

    // Rules for the BK section: the commitment gain applied as a static
    // rule on (k, q), then the user's ad hoc rules.
    let mut rules: Vec<PolicyRule> = Vec::new();
    if let Ok(sol) = &commitment_solution {
        rules.push(PolicyRule::new(
            sol.f.columns(0, model.n).into_owned(),
            sol.f.columns(model.n, model.m).into_owned(),
            RuleKind::CommitmentAsIf,
        ));
    }
    rules.extend(opts.rules.iter().cloned());

    let bk_entries: Vec<BkEntry> = rules
        .iter()
        .map(|rule| BkEntry {
            rule: rule_json_of(rule),
            result: bk_body(model, rule, tol),
        })
        .collect();

    // Experiments. The BK identification wants a rule that feeds back on
    // jump variables and has an admissible manifold; user rules are
    // tried first, then the unit default. The rule used is recorded in
    // the section.
    let default_probe = PolicyRule::new(
        nalgebra::RowDVector::zeros(model.n),
        nalgebra::RowDVector::from_element(model.m, 1.0),
        RuleKind::AdHoc,
    );
    let probe_rule = opts
        .rules
        .iter()
        .filter(|r| !r.is_restricted())
        .find(|r| bk::select_manifold(model, r, tol).is_ok())
        .cloned()
        .unwrap_or(default_probe);
    let identification_bk = identification_bk_section(model, &probe_rule, &k0, opts.horizon, tol);
    let identification_commitment =
        identification_commitment_section(model, &k0, opts.horizon, opts.seed, tol);

    let covariance = Section::from_result(
        analysis::covariance_comparison(model, &k0, opts.horizon, 0.1, tol).map(|r| {
            CovarianceJson {
                perturbation: r.perturbation,
                n_gap: r.n_gap,
                bk_cross_base: mat(&r.bk_cross_base),
                bk_cross_perturbed: mat(&r.bk_cross_perturbed),
                bk_cross_gap: r.bk_cross_gap,
                commitment_cross_base: mat(&r.commitment_cross_base),
                commitment_cross_perturbed: mat(&r.commitment_cross_perturbed),
                commitment_cross_gap: r.commitment_cross_gap,
            }
        }),
        "analysis",
    );

    AnalysisReport {
        schema_version: SCHEMA_VERSION,
        model_digest: model_digest(model),
        model: model_section,
        controllability: ControllabilitySection {
            full_system,
            reduced_system,
        },
        bk: bk_entries,
        commitment: commitment_section,
        experiments: ExperimentsSection {
            identification_bk,
            identification_commitment,
            covariance,
        },
        config: tol.clone(),
    }
}

/// Runs the observational-equivalence experiment for a rule, selecting
/// the manifold from that rule's own closed loop.
pub fn identification_bk_section(
    model: &ModelSpec,
    rule: &PolicyRule,
    k0: &DVector<f64>,
    horizon: u64,
    tol: &Tolerances,
) -> Section<BkIdentificationJson> {
    Section::from_result(
        bk::select_manifold(model, rule, tol)
            .map_err(AnalysisError::Bk)
            .and_then(|manifold| {
                analysis::identification_experiment_bk(
                    model,
                    rule,
                    &manifold.n_matrix,
                    k0,
                    horizon,
                    tol,
                )
            })
            .map(|r| BkIdentificationJson {
                rule: rule_json_of(rule),
                restricted_rule: r.restricted_rule.f_k.iter().copied().collect(),
                r_max_diff: r.r_max_diff,
                equivalent: r.equivalent,
                regressor_rank: r.regressor_rank,
                expected_rank: r.expected_rank,
                rank_deficiency: r.rank_deficiency,
                singular_values: r.singular_values,
            }),
        "analysis",
    )
}

/// Solves commitment and runs the least-squares recovery of Phi.
pub fn identification_commitment_section(
    model: &ModelSpec,
    k0: &DVector<f64>,
    horizon: u64,
    seed: u64,
    tol: &Tolerances,
) -> Section<CommitmentIdentificationJson> {
    Section::from_result(
        commitment::solve_commitment(model, tol)
            .map_err(AnalysisError::Commitment)
            .and_then(|sol| {
                analysis::identification_experiment_commitment(model, &sol, k0, horizon, seed, tol)
            })
            .map(|r| CommitmentIdentificationJson {
                recovered_phi: r.recovered_phi.iter().copied().collect(),
                expected_phi: r.expected_phi.iter().copied().collect(),
                max_coefficient_error: r.max_coefficient_error,
                identified: r.identified,
                regressor_rank: r.regressor_rank,
                retried: r.retried,
            }),
        "analysis",
    )
}

/// Classification and enumeration of one rule as a report section.
pub fn bk_section_for_rule(
    model: &ModelSpec,
    rule: &PolicyRule,
    tol: &Tolerances,
) -> Section<BkBody> {
    bk_body(model, rule, tol)
}

fn bk_body(model: &ModelSpec, rule: &PolicyRule, tol: &Tolerances) -> Section<BkBody> {
    let result = bk::enumerate_unchecked(model, rule, tol).map(|set| {
        let (_, split) = bk::classify_bk(model, rule, tol).expect("classified once already");
        let equilibria = set
            .solutions
            .iter()
            .map(|sol| {
                let restricted = bk::observational_equivalence(rule, &sol.n_matrix);
                let quasi = Section::from_result(
                    bk::solve_quasi_optimal(model, &sol.n_matrix, tol).map(|q| QuasiOptimalJson {
                        p_reduced: mat(&q.riccati.p),
                        f_reduced: q.riccati.f.iter().copied().collect(),
                        closed_loop_spectrum: spectrum(&q.riccati.closed_loop_eigenvalues),
                        riccati_residual: q.riccati.residual,
                        riccati_iterations: q.riccati.iterations,
                    }),
                    "bk_solver",
                );
                EquilibriumJson {
                    subset: sol.subset.clone(),
                    n_matrix: mat(&sol.n_matrix),
                    conditioning: sol.conditioning,
                    manifold_residual: sol.manifold_residual,
                    restricted_rule: restricted.f_k.iter().copied().collect(),
                    quasi_optimal: quasi,
                }
            })
            .collect();
        BkBody {
            case: set.case,
            stable_count: split.n_s,
            unit_stable_count: split.unit_stable_count,
            threshold: split.threshold,
            borderline: split.borderline.clone(),
            closed_loop_spectrum: spectrum(&split.eigenvalues),
            count_formula: set.count_formula,
            upper_bound: set.upper_bound,
            indeterminacy_warning: set.count_formula > 1,
            equilibria,
            rejected: set
                .rejected
                .iter()
                .map(|r| RejectedJson {
                    subset: r.subset.clone(),
                    reason: r.reason.to_string(),
                })
                .collect(),
        }
    });
    Section::from_result(result, "bk_solver")
}

fn commitment_json(
    sol: &CommitmentSolution,
    model: &ModelSpec,
    tol: &Tolerances,
) -> CommitmentJson {
    let history_rule = Section::from_result(
        commitment::build_history_rule(sol, model, tol).map(|h| HistoryRuleJson {
            psi_r: h.psi_r,
            psi_k0: h.psi_k0.iter().copied().collect(),
            psi_k1: h.psi_k1.iter().copied().collect(),
            parameter_count: h.parameter_count,
            identified: h.identified,
        }),
        "commitment",
    );
    CommitmentJson {
        p: mat(&sol.p),
        f: sol.f.iter().copied().collect(),
        phi: sol.phi.iter().copied().collect(),
        q0_map: mat(&sol.q0_map),
        t_closed: mat(&sol.t_closed),
        p_mm_condition: sol.p_mm_condition,
        closed_loop_spectrum: spectrum(&sol.riccati.closed_loop_eigenvalues),
        foc_residual_r: sol.foc_residuals.0,
        foc_residual_y: sol.foc_residuals.1,
        riccati_residual: sol.riccati.residual,
        riccati_iterations: sol.riccati.iterations,
        history_rule,
    }
}

// Error types are not Clone (they hold io sources elsewhere); rebuild
// the few variants the pipeline needs to report twice.
fn clone_bk_error(e: &BkError) -> BkError {
    match e {
        BkError::NoEquilibrium {
            stable,
            predetermined,
        } => BkError::NoEquilibrium {
            stable: *stable,
            predetermined: *predetermined,
        },
        other => BkError::RejectedSubset {
            subset: Vec::new(),
            reason: other.to_string(),
        },
    }
}

fn clone_commitment_error(e: &CommitmentError) -> CommitmentError {
    match e {
        CommitmentError::NotControllable { report } => CommitmentError::NotControllable {
            report: report.clone(),
        },
        CommitmentError::SingularPmm { condition } => CommitmentError::SingularPmm {
            condition: *condition,
        },
        other => CommitmentError::Dimension(other.to_string()),
    }
}
