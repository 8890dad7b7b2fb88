//! Error types, one enum per subsystem, plus the crate-wide rollup used
//! by the CLI to choose an exit code.
//!
//! Exit-code convention: mathematical refusals (uncontrollable system, no
//! rational-expectations equilibrium, singular P_mm) map to 2, everything
//! else (parse, dimension, internal) to 1.

use thiserror::Error;

use crate::spectral::ControllabilityReport;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read tolerance file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse tolerance file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown tolerance key `{0}`")]
    UnknownKey(String),
    #[error("cannot parse value `{value}` for tolerance key `{key}`")]
    BadValue { key: String, value: String },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse model file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("model validation failed:\n{}", violations.join("\n"))]
    Invalid { violations: Vec<String> },
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("defective matrix: eigenvalue {re}{im:+}i has geometric multiplicity {geometric} < algebraic multiplicity {algebraic}")]
    Defective {
        re: f64,
        im: f64,
        geometric: usize,
        algebraic: usize,
    },
    #[error("complex solution — conjugate pair split across stable set (imaginary residual {residual:.3e})")]
    ComplexResidual { residual: f64 },
    #[error("eigensolver failed to converge")]
    EigenFailure,
}

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("system not controllable (rank {} of {}); refusing the Riccati solve", report.rank, report.dim)]
    NotControllable { report: ControllabilityReport },
    #[error("Riccati iteration did not converge within {iterations} iterations (last step {last_step:.3e}, last residual {last_residual:.3e})")]
    NoConvergence {
        iterations: u64,
        last_step: f64,
        last_residual: f64,
    },
    #[error("Riccati fixed point is not stabilizing: closed-loop modulus {max_modulus} >= threshold {threshold}")]
    NotStabilizing { max_modulus: f64, threshold: f64 },
}

#[derive(Debug, Error)]
pub enum BkError {
    #[error("no rational expectations equilibrium: {stable} stable eigenvalues < {predetermined} predetermined variables")]
    NoEquilibrium { stable: usize, predetermined: usize },
    #[error("subset {subset:?} rejected: {reason}")]
    RejectedSubset { subset: Vec<usize>, reason: String },
    #[error("no admissible equilibrium manifold: all {candidates} stable subsets rejected (last: {last})")]
    NoAdmissibleManifold { candidates: u64, last: String },
    #[error("rule must not feed back on non-predetermined variables here (F_1m != 0)")]
    RuleNotRestricted,
    #[error("reduced pair (A', B_n1) not controllable (rank {} of {})", report.rank, report.dim)]
    ReducedNotControllable { report: ControllabilityReport },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

#[derive(Debug, Error)]
pub enum CommitmentError {
    #[error("system not controllable over the full state (rank {} of {}); commitment requires full controllability", report.rank, report.dim)]
    NotControllable { report: ControllabilityReport },
    #[error("Φ representation unavailable: P_mm numerically singular (condition {condition:.3e})")]
    SingularPmm { condition: f64 },
    #[error("first-order conditions violated along the solved path (residual {residual:.3e} > {tolerance:.3e}); internal consistency failure")]
    FocResidual { residual: f64, tolerance: f64 },
    #[error("history rule requires a single non-predetermined variable (m = 1), got m = {m}")]
    HistoryRuleUnsupported { m: usize },
    #[error("multiplier elimination impossible: rule coefficient on μ_q is {coefficient:.3e}")]
    DegenerateElimination { coefficient: f64 },
    #[error("pole placement targets must be closed under conjugation")]
    TargetsNotConjugateClosed,
    #[error("pole placement targets must be distinct (gap {gap:.3e} between targets {a} and {b})")]
    RepeatedTargets { gap: f64, a: usize, b: usize },
    #[error("pole placement verification failed: achieved eigenvalues deviate from targets by {deviation:.3e}")]
    PlacementFailed { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("horizon must be at least {minimum}, got {got}")]
    HorizonTooShort { minimum: u64, got: u64 },
    #[error("exogenous path shorter than the simulation horizon ({len} < {horizon})")]
    ExogenousTooShort { len: usize, horizon: u64 },
    #[error("experiment refused: {0}")]
    Refused(String),
    #[error("regressors remain rank-deficient after {attempts} perturbed retries (rank {rank} of {expected})")]
    RankDeficient {
        attempts: usize,
        rank: usize,
        expected: usize,
    },
    #[error("cannot write CSV: {0}")]
    Csv(#[from] std::io::Error),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error(transparent)]
    Bk(#[from] BkError),
    #[error(transparent)]
    Commitment(#[from] CommitmentError),
}

/// Crate-wide error with the provenance of the failing module attached.
#[derive(Debug, Error)]
pub enum RelqError {
    #[error("[config] {0}")]
    Config(#[from] ConfigError),
    #[error("[model] {0}")]
    Model(#[from] ModelError),
    #[error("[spectral] {0}")]
    Spectral(#[from] SpectralError),
    #[error("[riccati] {0}")]
    Riccati(#[from] RiccatiError),
    #[error("[bk_solver] {0}")]
    Bk(#[from] BkError),
    #[error("[commitment] {0}")]
    Commitment(#[from] CommitmentError),
    #[error("[analysis] {0}")]
    Analysis(#[from] AnalysisError),
    #[error("[cli] {0}")]
    Usage(String),
    #[error("[cli] {0}")]
    Io(#[from] std::io::Error),
}

impl RelqError {
    /// True when the failure is a mathematical refusal rather than a
    /// usage or internal error.
    pub fn is_refusal(&self) -> bool {
        match self {
            RelqError::Riccati(RiccatiError::NotControllable { .. }) => true,
            RelqError::Bk(e) => bk_is_refusal(e),
            RelqError::Commitment(e) => commitment_is_refusal(e),
            RelqError::Analysis(e) => analysis_is_refusal(e),
            _ => false,
        }
    }

    /// Process exit code: 0 is success (not represented here), 2 a
    /// mathematical refusal, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_refusal() {
            2
        } else {
            1
        }
    }
}

fn bk_is_refusal(e: &BkError) -> bool {
    matches!(
        e,
        BkError::NoEquilibrium { .. }
            | BkError::NoAdmissibleManifold { .. }
            | BkError::ReducedNotControllable { .. }
    ) || matches!(e, BkError::Riccati(RiccatiError::NotControllable { .. }))
}

fn commitment_is_refusal(e: &CommitmentError) -> bool {
    matches!(
        e,
        CommitmentError::NotControllable { .. }
            | CommitmentError::SingularPmm { .. }
            | CommitmentError::HistoryRuleUnsupported { .. }
            | CommitmentError::DegenerateElimination { .. }
    ) || matches!(
        e,
        CommitmentError::Riccati(RiccatiError::NotControllable { .. })
    )
}

fn analysis_is_refusal(e: &AnalysisError) -> bool {
    match e {
        AnalysisError::Refused(_) => true,
        AnalysisError::Riccati(RiccatiError::NotControllable { .. }) => true,
        AnalysisError::Bk(inner) => bk_is_refusal(inner),
        AnalysisError::Commitment(inner) => commitment_is_refusal(inner),
        _ => false,
    }
}
