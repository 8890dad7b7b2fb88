//! Linear-quadratic rational-expectations policy problems: solve them,
//! classify their equilibria, and stress-test what the data they
//! generate can identify.
//!
//! The crate covers two solution concepts for the same model class.
//! Quasi-optimal (Blanchard-Kahn) rules feed back on predetermined
//! variables only and live on a saddle-path manifold `q = -N k`; optimal
//! commitment rules augment the state with the jump variables'
//! Lagrange multipliers and stabilize every direction. The analysis
//! layer turns the contrast into executable experiments: rule
//! parameters on jump variables are not identified under the former and
//! fully identified under the latter.
//!
//! ## Where to start
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example validate_and_inspect   # model file round trip
//! cargo run --example controllability        # Kalman rank test
//! cargo run --example spectral_split         # eigenvalues vs 1/sqrt(beta)
//! cargo run --example riccati                # discounted DARE + gain
//! cargo run --example saddle_path            # N matrix and the reduced problem
//! cargo run --example enumerate_equilibria   # indeterminacy of over-stable rules
//! cargo run --example commitment             # Ramsey solve, Phi, q0 map
//! cargo run --example history_rule           # interest-rate smoothing form
//! cargo run --example identification         # what regressions can recover
//! cargo run --example covariance_contrast    # who can move the k-q comovement
//! cargo run --example time_inconsistency     # the re-optimization temptation
//! ```
//!
//! The same pipelines are scriptable through the thin `relq` binary
//! (`analyze`, `enumerate`, `simulate`, `identify`); see the README.
//!
//! All solvers work in deviation coordinates around the model's targets
//! and share one [`config::Tolerances`] record.

pub mod analysis;
pub mod bk;
pub mod cli;
pub mod commitment;
pub mod config;
pub mod error;
pub mod jsonfmt;
pub mod model;
pub mod report;
pub mod riccati;
pub mod spectral;

pub use analysis::{simulate, SimLaw, Trajectory};
pub use bk::{classify_bk, enumerate_equilibria, solve_quasi_optimal, BkCase, BkSolution};
pub use commitment::{solve_commitment, CommitmentSolution, HistoryRule};
pub use config::Tolerances;
pub use error::RelqError;
pub use model::{load_model, validate_model, ModelSpec, PolicyRule, RuleKind};
pub use riccati::{loss_of_state, solve_dare, RiccatiSolution};
pub use spectral::{controllability, eigenvalue_mirror_check, spectral_split, SpectralSplit};
