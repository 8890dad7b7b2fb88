//! Centralized numerical tolerances and solver limits.
//!
//! Every threshold used anywhere in the crate lives in [`Tolerances`] so
//! that a single record pins the numerical behaviour of a whole run. The
//! CLI loads overrides from the file named by the `RELQ_CONFIG`
//! environment variable and from repeated `--tol-override key=value`
//! flags; library users pass a `Tolerances` value directly.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::ConfigError;

macro_rules! tolerances {
    ($(#[doc = $doc:literal] $name:ident : $ty:ty = $default:expr,)*) => {
        /// Numerical tolerances and iteration limits shared by all solvers.
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Tolerances {
            $(#[doc = $doc] pub $name: $ty,)*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl Tolerances {
            /// Applies a single `key=value` override, as supplied on the
            /// command line. Keys match the field names of this struct.
            pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
                match key {
                    $(stringify!($name) => {
                        self.$name = value.parse().map_err(|_| ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                        })?;
                    })*
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
                Ok(())
            }
        }
    };
}

tolerances! {
    /// Max elementwise asymmetry accepted in Q and in Riccati iterates.
    symmetry: f64 = 1e-12,
    /// Most negative eigenvalue accepted when testing positive semi-definiteness.
    psd: f64 = 1e-10,
    /// Margin around the stability threshold 1/sqrt(beta); moduli within it count as unstable.
    stability_margin: f64 = 1e-8,
    /// Stabilizing-solution margin: closed-loop moduli must stay below 1/sqrt(beta) by this much.
    stabilizing_margin: f64 = 1e-10,
    /// Eigenvalues closer than this (relative to the largest modulus) are treated as repeated.
    distinctness: f64 = 1e-7,
    /// Max residual accepted per left-eigenvector row in M(A-BF) = Lambda M.
    eig_residual: f64 = 1e-8,
    /// Max imaginary part tolerated when casting N or a gain row to real.
    imag_residual: f64 = 1e-8,
    /// Condition-number ceiling for M_mm and P_mm inversions.
    condition_max: f64 = 1e12,
    /// Relative singular-value cutoff for numerical rank (scaled by dimension and sigma_max).
    rank_rel: f64 = 1e-12,
    /// Riccati fixed-point step tolerance, relative to 1 + norm(P).
    dare_step: f64 = 1e-12,
    /// Riccati residual tolerance, relative to 1 + norm(P).
    dare_residual: f64 = 1e-9,
    /// Riccati iteration cap.
    dare_max_iter: u64 = 100_000,
    /// Modulus-matching tolerance in the eigenvalue mirroring check.
    mirror: f64 = 1e-6,
    /// Max residual of the saddle-manifold identity for an admissible subset.
    manifold: f64 = 1e-8,
    /// Max first-order-condition residual along a simulated commitment path.
    foc: f64 = 1e-8,
    /// Max replay residual of the history-dependent rule.
    replay: f64 = 1e-8,
    /// Smallest rule coefficient treated as nonzero when eliminating multipliers.
    rule_coef_min: f64 = 1e-10,
    /// Tolerance for recovering rule coefficients by least squares.
    identification: f64 = 1e-6,
    /// Max gap between instrument paths of observationally equivalent rules.
    equivalence: f64 = 1e-10,
    /// Minimum max-norm gap certifying that two equilibria have distinct N matrices.
    n_distinct_gap: f64 = 1e-8,
    /// State norm above which a simulation is truncated and flagged divergent.
    divergence_norm: f64 = 1e12,
    /// Default simulation horizon.
    default_horizon: u64 = 500,
}

impl Tolerances {
    /// Reads a tolerance file (JSON, any subset of fields) and merges it
    /// over the defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
