//! The linear-quadratic rational-expectations policy problem and its
//! on-disk JSON form.
//!
//! A [`ModelSpec`] stacks `n` predetermined variables `k` on top of `m`
//! non-predetermined (jump) variables `q`. All solvers work in deviation
//! coordinates: component `i` of the state is `(x_i - x_i*)/x_i*` when
//! the target `x_i*` is nonzero and `x_i - x_i*` when it is zero, and the
//! instrument enters as `r - r*`. The dynamics are
//!
//! ```text
//! y_{t+1} = A y_t + B (r_t - r*) + gamma z_t,      y = (k_dev, q_dev)
//! ```
//!
//! and a [`PolicyRule`] closes the loop with `r_t - r* = -F_1n k_dev -
//! F_1m q_dev`, giving the transition `A - B F`. The per-period loss is
//! `y' Q y + rho (r - r*)^2` discounted by `beta^t`.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::config::Tolerances;
use crate::error::ModelError;
use crate::jsonfmt;

/// Whether a state component measures deviations relative to its target
/// or as an absolute gap (chosen automatically when the target is zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMode {
    Relative,
    Absolute,
}

/// Primitives of one policy problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    /// Number of predetermined variables.
    pub n: usize,
    /// Number of non-predetermined variables.
    pub m: usize,
    /// Discount factor, in (0, 1].
    pub beta: f64,
    /// Instrument-volatility weight, > 0.
    pub rho: f64,
    /// (n+m) x (n+m) transition matrix.
    pub a: DMatrix<f64>,
    /// (n+m) x 1 instrument-impact matrix.
    pub b: DMatrix<f64>,
    /// (n+m) x (n+m) symmetric PSD loss-weight matrix.
    pub q: DMatrix<f64>,
    /// Optional (n+m) x k_z exogenous-impact matrix.
    pub gamma: Option<DMatrix<f64>>,
    /// Optional deterministic exogenous path, one k_z-vector per period.
    pub z_path: Option<Vec<DVector<f64>>>,
    /// Target level for each predetermined variable.
    pub k_star: DVector<f64>,
    /// Target level for each non-predetermined variable.
    pub q_star: DVector<f64>,
    /// Target level for the instrument.
    pub r_star: f64,
    /// Optional labels, predetermined first.
    pub var_names: Option<Vec<String>>,
}

impl ModelSpec {
    /// Full state dimension n + m.
    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn a_nn(&self) -> DMatrix<f64> {
        self.a.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn a_nm(&self) -> DMatrix<f64> {
        self.a.view((0, self.n), (self.n, self.m)).into_owned()
    }

    pub fn a_mn(&self) -> DMatrix<f64> {
        self.a.view((self.n, 0), (self.m, self.n)).into_owned()
    }

    pub fn a_mm(&self) -> DMatrix<f64> {
        self.a.view((self.n, self.n), (self.m, self.m)).into_owned()
    }

    /// Instrument impact on the predetermined block, (n x 1).
    pub fn b_n(&self) -> DMatrix<f64> {
        self.b.view((0, 0), (self.n, 1)).into_owned()
    }

    /// Instrument impact on the non-predetermined block, (m x 1).
    pub fn b_m(&self) -> DMatrix<f64> {
        self.b.view((self.n, 0), (self.m, 1)).into_owned()
    }

    pub fn q_nn(&self) -> DMatrix<f64> {
        self.q.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn q_nm(&self) -> DMatrix<f64> {
        self.q.view((0, self.n), (self.n, self.m)).into_owned()
    }

    pub fn q_mn(&self) -> DMatrix<f64> {
        self.q.view((self.n, 0), (self.m, self.n)).into_owned()
    }

    pub fn q_mm(&self) -> DMatrix<f64> {
        self.q.view((self.n, self.n), (self.m, self.m)).into_owned()
    }

    /// Closed-loop transition A - B F for a rule.
    pub fn closed_loop(&self, rule: &PolicyRule) -> DMatrix<f64> {
        &self.a - &self.b * rule.stacked()
    }

    /// Deviation mode per state component, predetermined first. A zero
    /// target switches that component to absolute deviations so the loss
    /// stays well defined for zero-steady-state gaps.
    pub fn deviation_modes(&self) -> Vec<DeviationMode> {
        self.k_star
            .iter()
            .chain(self.q_star.iter())
            .map(|&target| {
                if target == 0.0 {
                    DeviationMode::Absolute
                } else {
                    DeviationMode::Relative
                }
            })
            .collect()
    }

    /// Variable labels, falling back to k1..kn, q1..qm.
    pub fn labels(&self) -> Vec<String> {
        match &self.var_names {
            Some(names) if names.len() == self.dim() => names.clone(),
            _ => (1..=self.n)
                .map(|i| format!("k{i}"))
                .chain((1..=self.m).map(|i| format!("q{i}")))
                .collect(),
        }
    }

    /// Canonical JSON form (fixed key order, 17-significant-digit
    /// numbers). Saving and re-loading reproduces the bytes exactly.
    pub fn canonical_json(&self) -> String {
        jsonfmt::to_string_pinned(&ModelFile::from_spec(self))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.canonical_json()).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Tag distinguishing how a rule was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    #[serde(rename = "adhoc")]
    AdHoc,
    QuasiOptimal,
    CommitmentAsIf,
}

/// Linear feedback rule `r - r* = -F_1n k_dev - F_1m q_dev`.
///
/// Rules are applied to date-t states: the closed loop is `A - B F` with
/// `F = (F_1n, F_1m)` stacked as one row.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyRule {
    /// Weights on the predetermined deviations, 1 x n.
    pub f_k: RowDVector<f64>,
    /// Weights on the non-predetermined deviations, 1 x m.
    pub f_q: RowDVector<f64>,
    pub kind: RuleKind,
}

impl PolicyRule {
    pub fn new(f_k: RowDVector<f64>, f_q: RowDVector<f64>, kind: RuleKind) -> Self {
        Self { f_k, f_q, kind }
    }

    /// The all-zero rule (open loop).
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            f_k: RowDVector::zeros(n),
            f_q: RowDVector::zeros(m),
            kind: RuleKind::AdHoc,
        }
    }

    pub fn from_slice(f_k: &[f64], f_q: &[f64], kind: RuleKind) -> Self {
        Self {
            f_k: RowDVector::from_row_slice(f_k),
            f_q: RowDVector::from_row_slice(f_q),
            kind,
        }
    }

    /// The full gain row F = (F_1n, F_1m).
    pub fn stacked(&self) -> RowDVector<f64> {
        let mut row = RowDVector::zeros(self.f_k.ncols() + self.f_q.ncols());
        row.view_mut((0, 0), (1, self.f_k.ncols()))
            .copy_from(&self.f_k);
        row.view_mut((0, self.f_k.ncols()), (1, self.f_q.ncols()))
            .copy_from(&self.f_q);
        row
    }

    /// Instrument deviation produced by this rule at state `y`.
    pub fn apply(&self, y: &DVector<f64>) -> f64 {
        -(self.stacked() * y)[0]
    }

    /// True when the rule does not feed back on jump variables.
    pub fn is_restricted(&self) -> bool {
        self.f_q.iter().all(|&c| c == 0.0)
    }
}

/// Outcome of validating a model: the list of violated invariants.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Deviation mode chosen per state component (zero targets switch to
    /// absolute gaps).
    pub deviation_modes: Vec<DeviationMode>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Growth verdict for a simulated trajectory against the no-bubble bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundednessReport {
    /// Estimated per-period log-growth of the state norm.
    pub growth_exponent: f64,
    /// Log of the stability threshold 1/sqrt(beta).
    pub log_threshold: f64,
    /// True when the growth exponent clears the threshold by the margin.
    pub bound_satisfied: bool,
}

/// Checks every model invariant and reports all violations at once;
/// never mutates or rejects the input.
pub fn validate_model(spec: &ModelSpec, tol: &Tolerances) -> ValidationReport {
    let mut v = Vec::new();
    let d = spec.dim();

    if !(spec.beta > 0.0 && spec.beta <= 1.0) {
        v.push(format!("beta must lie in (0, 1], got {}", spec.beta));
    }
    if !(spec.rho > 0.0 && spec.rho.is_finite()) {
        v.push(format!("rho must be positive, got {}", spec.rho));
    }
    if spec.a.nrows() != d || spec.a.ncols() != d {
        v.push(format!(
            "A must be {d}x{d}, got {}x{}",
            spec.a.nrows(),
            spec.a.ncols()
        ));
    }
    if spec.b.nrows() != d || spec.b.ncols() != 1 {
        v.push(format!(
            "B must be {d}x1, got {}x{}",
            spec.b.nrows(),
            spec.b.ncols()
        ));
    }
    if spec.q.nrows() != d || spec.q.ncols() != d {
        v.push(format!(
            "Q must be {d}x{d}, got {}x{}",
            spec.q.nrows(),
            spec.q.ncols()
        ));
    }
    if spec.k_star.len() != spec.n {
        v.push(format!(
            "k_star must have length {}, got {}",
            spec.n,
            spec.k_star.len()
        ));
    }
    if spec.q_star.len() != spec.m {
        v.push(format!(
            "q_star must have length {}, got {}",
            spec.m,
            spec.q_star.len()
        ));
    }
    if let Some(gamma) = &spec.gamma {
        if gamma.nrows() != d {
            v.push(format!("gamma must have {d} rows, got {}", gamma.nrows()));
        }
        if let Some(z) = &spec.z_path {
            if let Some(bad) = z.iter().position(|zt| zt.len() != gamma.ncols()) {
                v.push(format!(
                    "z_path[{bad}] has length {}, expected {} (columns of gamma)",
                    z[bad].len(),
                    gamma.ncols()
                ));
            }
        }
    } else if spec.z_path.is_some() {
        v.push("z_path given without gamma".to_string());
    }
    if let Some(names) = &spec.var_names {
        if names.len() != d {
            v.push(format!(
                "var_names must have {d} entries, got {}",
                names.len()
            ));
        }
    }

    let finite = |m: &DMatrix<f64>| m.iter().all(|x| x.is_finite());
    if !finite(&spec.a) || !finite(&spec.b) || !finite(&spec.q) {
        v.push("A, B, Q must contain only finite numbers".to_string());
    }

    // The spectral tests below only make sense on a well-shaped Q.
    if spec.q.nrows() == d && spec.q.ncols() == d && finite(&spec.q) {
        let asym = (&spec.q - spec.q.transpose()).abs().max();
        if asym > tol.symmetry {
            v.push(format!(
                "Q must be symmetric (Q_mn = Q_nm'): max asymmetry {asym:.3e} > {:.1e}",
                tol.symmetry
            ));
        }
        let sym = (&spec.q + spec.q.transpose()) * 0.5;
        let eigs = sym.symmetric_eigenvalues();
        let min_eig = eigs.min();
        if min_eig < -tol.psd {
            v.push(format!(
                "Q must be positive semi-definite: smallest eigenvalue {min_eig:.3e} < -{:.1e}",
                tol.psd
            ));
        }
    }

    ValidationReport {
        violations: v,
        deviation_modes: spec.deviation_modes(),
    }
}

/// Loads a model from its JSON file, validating it in the process.
/// Missing targets default to ones (`k_star`, `q_star`) and zero
/// (`r_star`), so deviations read as absolute gaps around one.
pub fn load_model(path: &Path) -> Result<ModelSpec, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| ModelError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let spec = file.into_spec().map_err(|message| ModelError::Parse {
        path: path.display().to_string(),
        message,
    })?;
    let report = validate_model(&spec, &Tolerances::default());
    if report.is_valid() {
        Ok(spec)
    } else {
        Err(ModelError::Invalid {
            violations: report.violations,
        })
    }
}

/// On-disk schema. Matrices are row-major arrays of row arrays.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    m: usize,
    beta: f64,
    rho: f64,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_path: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    var_names: Option<Vec<String>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() {
        return Err(format!("matrix {name} has no rows"));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(format!("matrix {name} has an empty first row"));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!(
            "matrix {name} is ragged: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        ));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ModelFile {
    fn into_spec(self) -> Result<ModelSpec, String> {
        let a = rows_to_matrix(&self.a, "A")?;
        let b = rows_to_matrix(&self.b, "B")?;
        let q = rows_to_matrix(&self.q, "Q")?;
        let gamma = self
            .gamma
            .as_deref()
            .map(|g| rows_to_matrix(g, "gamma"))
            .transpose()?;
        let z_path = self
            .z_path
            .map(|z| z.into_iter().map(DVector::from_vec).collect());
        let k_star = self
            .k_star
            .map(DVector::from_vec)
            .unwrap_or_else(|| DVector::from_element(self.n, 1.0));
        let q_star = self
            .q_star
            .map(DVector::from_vec)
            .unwrap_or_else(|| DVector::from_element(self.m, 1.0));
        Ok(ModelSpec {
            n: self.n,
            m: self.m,
            beta: self.beta,
            rho: self.rho,
            a,
            b,
            q,
            gamma,
            z_path,
            k_star,
            q_star,
            r_star: self.r_star.unwrap_or(0.0),
            var_names: self.var_names,
        })
    }

    fn from_spec(spec: &ModelSpec) -> Self {
        Self {
            n: spec.n,
            m: spec.m,
            beta: spec.beta,
            rho: spec.rho,
            a: matrix_to_rows(&spec.a),
            b: matrix_to_rows(&spec.b),
            q: matrix_to_rows(&spec.q),
            gamma: spec.gamma.as_ref().map(matrix_to_rows),
            z_path: spec
                .z_path
                .as_ref()
                .map(|z| z.iter().map(|zt| zt.iter().copied().collect()).collect()),
            k_star: Some(spec.k_star.iter().copied().collect()),
            q_star: Some(spec.q_star.iter().copied().collect()),
            r_star: Some(spec.r_star),
            var_names: spec.var_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var_model(q: DMatrix<f64>, beta: f64) -> ModelSpec {
        ModelSpec {
            n: 1,
            m: 1,
            beta,
            rho: 1.0,
            a: DMatrix::identity(2, 2),
            b: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            q,
            gamma: None,
            z_path: None,
            k_star: DVector::from_element(1, 1.0),
            q_star: DVector::from_element(1, 1.0),
            r_star: 0.0,
            var_names: None,
        }
    }

    #[test]
    fn identity_q_is_valid() {
        let spec = two_var_model(DMatrix::identity(2, 2), 0.99);
        let report = validate_model(&spec, &Tolerances::default());
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn asymmetric_q_is_flagged() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        let report = validate_model(&two_var_model(q, 0.99), &Tolerances::default());
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].contains("symmetric"));
    }

    #[test]
    fn indefinite_q_is_flagged() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let report = validate_model(&two_var_model(q, 0.99), &Tolerances::default());
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("semi-definite")));
    }

    #[test]
    fn out_of_range_beta_is_flagged() {
        let report = validate_model(
            &two_var_model(DMatrix::identity(2, 2), 1.2),
            &Tolerances::default(),
        );
        assert!(report.violations.iter().any(|v| v.contains("beta")));
    }

    #[test]
    fn zero_targets_switch_to_absolute_deviations() {
        let mut spec = two_var_model(DMatrix::identity(2, 2), 0.99);
        spec.q_star[0] = 0.0;
        assert_eq!(
            spec.deviation_modes(),
            vec![DeviationMode::Relative, DeviationMode::Absolute]
        );
    }

    #[test]
    fn load_reports_missing_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"n":1,"m":1,"beta":0.99,"rho":1.0,"A":[[1,0],[0,1]],"Q":[[1,0],[0,1]]}"#,
        )
        .unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains('B'), "got: {err}");
    }

    #[test]
    fn load_reports_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"n":2,"m":0,"beta":0.99,"rho":1.0,
                "A":[[1,0,0],[0,1,0],[0,0,1]],"B":[[1],[0],[0]],"Q":[[1,0,0],[0,1,0],[0,0,1]]}"#,
        )
        .unwrap();
        let err = load_model(&path).unwrap_err();
        match err {
            ModelError::Invalid { violations } => {
                assert!(violations.iter().any(|v| v.contains("A must be 2x2")));
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn absent_targets_default_to_ones_and_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"n":1,"m":1,"beta":0.99,"rho":1.0,
                "A":[[0.5,0],[0,0.5]],"B":[[1],[1]],"Q":[[1,0],[0,1]]}"#,
        )
        .unwrap();
        let spec = load_model(&path).unwrap();
        assert_eq!(spec.k_star, DVector::from_element(1, 1.0));
        assert_eq!(spec.q_star, DVector::from_element(1, 1.0));
        assert_eq!(spec.r_star, 0.0);
    }

    #[test]
    fn exogenous_blocks_round_trip_and_validate() {
        let mut spec = two_var_model(DMatrix::identity(2, 2), 0.99);
        spec.gamma = Some(DMatrix::from_column_slice(2, 1, &[0.5, 0.0]));
        spec.z_path = Some(vec![
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![0.5]),
        ]);
        assert!(validate_model(&spec, &Tolerances::default()).is_valid());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        spec.save(&path).unwrap();
        assert_eq!(load_model(&path).unwrap(), spec);

        // z without gamma, and a ragged z entry, are violations
        let mut orphan_z = two_var_model(DMatrix::identity(2, 2), 0.99);
        orphan_z.z_path = Some(vec![DVector::from_vec(vec![1.0])]);
        let report = validate_model(&orphan_z, &Tolerances::default());
        assert!(report.violations.iter().any(|v| v.contains("gamma")));

        spec.z_path = Some(vec![DVector::from_vec(vec![1.0, 2.0])]);
        let report = validate_model(&spec, &Tolerances::default());
        assert!(report.violations.iter().any(|v| v.contains("z_path")));
    }

    #[test]
    fn canonical_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let spec = two_var_model(DMatrix::identity(2, 2), 0.99);
        spec.save(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let reloaded = load_model(&path).unwrap();
        assert_eq!(reloaded, spec);
        reloaded.save(&path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rule_application_is_linear() {
        let rule = PolicyRule::from_slice(&[0.5], &[0.2], RuleKind::AdHoc);
        let y = DVector::from_vec(vec![2.0, -1.0]);
        assert_eq!(rule.apply(&y), -(0.5 * 2.0 - 0.2));
        assert_eq!(rule.stacked().ncols(), 2);
        assert!(!rule.is_restricted());
        assert!(PolicyRule::zero(1, 1).is_restricted());
    }
}
