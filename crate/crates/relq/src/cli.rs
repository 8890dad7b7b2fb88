//! Command-line front end: `analyze`, `enumerate`, `simulate`,
//! `identify`.
//!
//! Every command reads a JSON model file, runs its pipeline, and emits a
//! JSON report (stdout or `--out`). Tolerances come from defaults, then
//! the file named by `RELQ_CONFIG`, then repeated `--tol-override
//! key=value` flags. Exit codes: 0 success, 1 parse/usage/internal
//! error, 2 mathematical refusal.

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::analysis::{self, SimLaw};
use crate::bk;
use crate::commitment;
use crate::config::Tolerances;
use crate::error::RelqError;
use crate::model::{load_model, ModelSpec, PolicyRule, RuleKind};
use crate::report::{
    self, AnalyzeOptions, BkBody, RuleJson, Section, DEFAULT_SEED, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "relq",
    about = "Linear-quadratic rational-expectations policy problems: quasi-optimal and commitment rules, determinacy, identification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: validation, controllability, commitment solve,
    /// Blanchard-Kahn classification, identification and covariance
    /// experiments.
    Analyze {
        /// Model JSON file.
        model: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ad hoc rule to classify, n+m comma-separated coefficients
        /// (repeatable).
        #[arg(long = "rule")]
        rules: Vec<String>,
        /// Experiment horizon.
        #[arg(long)]
        horizon: Option<u64>,
        /// Initial predetermined deviations, n comma-separated values.
        #[arg(long)]
        k0: Option<String>,
        /// Seed for the degenerate-start retry perturbation.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Tolerance override key=value (repeatable).
        #[arg(long = "tol-override")]
        tol_overrides: Vec<String>,
    },
    /// Enumerate every Blanchard-Kahn equilibrium of a rule restricted
    /// to predetermined variables.
    Enumerate {
        model: PathBuf,
        /// Rule coefficients on predetermined variables (n values,
        /// comma-separated); zero rule when absent.
        #[arg(long)]
        rule: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "tol-override")]
        tol_overrides: Vec<String>,
    },
    /// Simulate the chosen solution and export the trajectory.
    Simulate {
        model: PathBuf,
        /// Which solution's closed loop to simulate.
        #[arg(long, value_enum)]
        solution: SolutionKind,
        /// Initial predetermined deviations, n comma-separated values.
        #[arg(long)]
        k0: Option<String>,
        #[arg(long)]
        horizon: Option<u64>,
        /// Write the trajectory CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "tol-override")]
        tol_overrides: Vec<String>,
    },
    /// Run both identification experiments.
    Identify {
        model: PathBuf,
        /// Augmented rule for the observational-equivalence experiment,
        /// n+m comma-separated coefficients; defaults to unit weights on
        /// the jump variables.
        #[arg(long)]
        rule: Option<String>,
        #[arg(long)]
        k0: Option<String>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "tol-override")]
        tol_overrides: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolutionKind {
    /// Quasi-optimal rule on the open-loop saddle manifold.
    Bk,
    /// Optimal commitment rule on (k, mu_q).
    Commitment,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, RelqError> {
    match cli.command {
        Command::Analyze {
            model,
            out,
            rules,
            horizon,
            k0,
            seed,
            tol_overrides,
        } => {
            let tol = build_tolerances(&tol_overrides)?;
            let spec = load_model(&model)?;
            let opts = AnalyzeOptions {
                rules: rules
                    .iter()
                    .map(|r| parse_rule_full(r, &spec))
                    .collect::<Result<_, _>>()?,
                horizon: effective_horizon(horizon, &tol)?,
                k0: k0.map(|s| parse_k0(&s, &spec)).transpose()?,
                seed,
            };
            let report = report::analyze(&spec, &opts, &tol);
            emit(&report.to_json(), out.as_deref())?;
            Ok(report.exit_code())
        }
        Command::Enumerate {
            model,
            rule,
            out,
            tol_overrides,
        } => {
            let tol = build_tolerances(&tol_overrides)?;
            let spec = load_model(&model)?;
            let policy = match rule {
                Some(s) => parse_rule_restricted(&s, &spec)?,
                None => PolicyRule::zero(spec.n, spec.m),
            };
            cmd_enumerate(&spec, &policy, out.as_deref(), &tol)
        }
        Command::Simulate {
            model,
            solution,
            k0,
            horizon,
            csv,
            out,
            tol_overrides,
        } => {
            let tol = build_tolerances(&tol_overrides)?;
            let spec = load_model(&model)?;
            let horizon = effective_horizon(horizon, &tol)?;
            let k0 = match k0 {
                Some(s) => parse_k0(&s, &spec)?,
                None => DVector::from_element(spec.n, 1.0),
            };
            cmd_simulate(
                &spec,
                solution,
                &k0,
                horizon,
                csv.as_deref(),
                out.as_deref(),
                &tol,
            )
        }
        Command::Identify {
            model,
            rule,
            k0,
            horizon,
            seed,
            out,
            tol_overrides,
        } => {
            let tol = build_tolerances(&tol_overrides)?;
            let spec = load_model(&model)?;
            let horizon = effective_horizon(horizon, &tol)?;
            let k0 = match k0 {
                Some(s) => parse_k0(&s, &spec)?,
                None => DVector::from_element(spec.n, 1.0),
            };
            let rule = match rule {
                Some(s) => parse_rule_full(&s, &spec)?,
                None => PolicyRule::new(
                    nalgebra::RowDVector::zeros(spec.n),
                    nalgebra::RowDVector::from_element(spec.m, 1.0),
                    RuleKind::AdHoc,
                ),
            };
            cmd_identify(&spec, &rule, &k0, horizon, seed, out.as_deref(), &tol)
        }
    }
}

#[derive(Serialize)]
struct EnumerateReport {
    schema_version: u32,
    model_digest: String,
    rule: RuleJson,
    result: Section<BkBody>,
    config: Tolerances,
}

fn cmd_enumerate(
    model: &ModelSpec,
    rule: &PolicyRule,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<i32, RelqError> {
    // Surface case 1 as a refusal but still emit the report shell.
    let result = report::bk_section_for_rule(model, rule, tol);
    let code = match &result {
        Section::Ok { data } => {
            if data.indeterminacy_warning {
                eprintln!(
                    "warning: {} admissible stable subsets — multiple equilibria, N is indeterminate",
                    data.count_formula
                );
            }
            0
        }
        Section::Refused { reason, .. } => {
            eprintln!("refused: {reason}");
            2
        }
        Section::Error { reason, .. } => {
            eprintln!("error: {reason}");
            1
        }
    };
    let report = EnumerateReport {
        schema_version: SCHEMA_VERSION,
        model_digest: report::model_digest(model),
        rule: report::rule_json_of(rule),
        result,
        config: tol.clone(),
    };
    emit(&crate::jsonfmt::to_string_pinned(&report), out)?;
    Ok(code)
}

#[derive(Serialize)]
struct SimulateSummary {
    schema_version: u32,
    model_digest: String,
    solution: String,
    horizon: u64,
    k0: Vec<f64>,
    discounted_loss: f64,
    growth_exponent: f64,
    log_threshold: f64,
    bound_satisfied: bool,
    divergent: bool,
    csv_path: Option<String>,
    config: Tolerances,
}

fn cmd_simulate(
    model: &ModelSpec,
    solution: SolutionKind,
    k0: &DVector<f64>,
    horizon: u64,
    csv: Option<&Path>,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<i32, RelqError> {
    let (law, initial, name) = match solution {
        SolutionKind::Bk => {
            let manifold = bk::select_manifold(model, &PolicyRule::zero(model.n, model.m), tol)?;
            let quasi = bk::solve_quasi_optimal(model, &manifold.n_matrix, tol)?;
            (
                SimLaw::quasi_optimal(model, &quasi, &manifold.n_matrix),
                k0.clone(),
                "bk",
            )
        }
        SolutionKind::Commitment => {
            let sol = commitment::solve_commitment(model, tol)?;
            let mut initial = DVector::zeros(model.dim());
            initial.rows_mut(0, model.n).copy_from(k0);
            (SimLaw::commitment(&sol), initial, "commitment")
        }
    };
    let traj = analysis::simulate(model, &law, &initial, horizon, tol)?;
    let bound = analysis::boundedness_of(&traj, model.beta, tol);

    if let Some(path) = csv {
        let mut file = std::fs::File::create(path)?;
        analysis::write_trajectory_csv(&traj, &model.labels(), &mut file)
            .map_err(RelqError::Analysis)?;
    }

    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        model_digest: report::model_digest(model),
        solution: name.to_string(),
        horizon,
        k0: k0.iter().copied().collect(),
        discounted_loss: traj.discounted_loss,
        growth_exponent: traj.growth_exponent,
        log_threshold: bound.log_threshold,
        bound_satisfied: bound.bound_satisfied,
        divergent: traj.divergent,
        csv_path: csv.map(|p| p.display().to_string()),
        config: tol.clone(),
    };
    emit(&crate::jsonfmt::to_string_pinned(&summary), out)?;
    Ok(0)
}

#[derive(Serialize)]
struct IdentifyReport {
    schema_version: u32,
    model_digest: String,
    identification_bk: Section<report::BkIdentificationJson>,
    identification_commitment: Section<report::CommitmentIdentificationJson>,
    config: Tolerances,
}

fn cmd_identify(
    model: &ModelSpec,
    rule: &PolicyRule,
    k0: &DVector<f64>,
    horizon: u64,
    seed: u64,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<i32, RelqError> {
    let report = IdentifyReport {
        schema_version: SCHEMA_VERSION,
        model_digest: report::model_digest(model),
        identification_bk: report::identification_bk_section(model, rule, k0, horizon, tol),
        identification_commitment: report::identification_commitment_section(
            model, k0, horizon, seed, tol,
        ),
        config: tol.clone(),
    };
    let code = {
        let codes = [
            section_code(&report.identification_bk),
            section_code(&report.identification_commitment),
        ];
        worst_code(&codes)
    };
    emit(&crate::jsonfmt::to_string_pinned(&report), out)?;
    Ok(code)
}

fn section_code<T: Serialize>(section: &Section<T>) -> i32 {
    match section {
        Section::Ok { .. } => 0,
        Section::Refused { .. } => 2,
        Section::Error { .. } => 1,
    }
}

fn worst_code(codes: &[i32]) -> i32 {
    if codes.contains(&1) {
        1
    } else if codes.contains(&2) {
        2
    } else {
        0
    }
}

fn build_tolerances(overrides: &[String]) -> Result<Tolerances, RelqError> {
    let mut tol = match std::env::var_os("RELQ_CONFIG") {
        Some(path) => Tolerances::from_file(Path::new(&path))?,
        None => Tolerances::default(),
    };
    for item in overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            RelqError::Usage(format!("--tol-override expects key=value, got `{item}`"))
        })?;
        tol.apply_override(key.trim(), value.trim())?;
    }
    Ok(tol)
}

fn effective_horizon(horizon: Option<u64>, tol: &Tolerances) -> Result<u64, RelqError> {
    let h = horizon.unwrap_or(tol.default_horizon);
    if h == 0 {
        return Err(RelqError::Usage("horizon must be at least 1".to_string()));
    }
    Ok(h)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, RelqError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| RelqError::Usage(format!("cannot parse `{x}` as a number")))
        })
        .collect()
}

fn parse_k0(s: &str, model: &ModelSpec) -> Result<DVector<f64>, RelqError> {
    let values = parse_floats(s)?;
    if values.len() != model.n {
        return Err(RelqError::Usage(format!(
            "--k0 needs {} values (one per predetermined variable), got {}",
            model.n,
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

fn parse_rule_full(s: &str, model: &ModelSpec) -> Result<PolicyRule, RelqError> {
    let values = parse_floats(s)?;
    if values.len() != model.dim() {
        return Err(RelqError::Usage(format!(
            "--rule needs {} coefficients (n then m), got {}",
            model.dim(),
            values.len()
        )));
    }
    Ok(PolicyRule::from_slice(
        &values[..model.n],
        &values[model.n..],
        RuleKind::AdHoc,
    ))
}

fn parse_rule_restricted(s: &str, model: &ModelSpec) -> Result<PolicyRule, RelqError> {
    let values = parse_floats(s)?;
    if values.len() != model.n {
        return Err(RelqError::Usage(format!(
            "--rule needs {} coefficients on predetermined variables, got {}",
            model.n,
            values.len()
        )));
    }
    Ok(PolicyRule::from_slice(
        &values,
        &vec![0.0; model.m],
        RuleKind::AdHoc,
    ))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), RelqError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
