//! What can a regression on equilibrium data recover?
//!
//! Under a quasi-optimal or ad hoc rule the jump variables are an exact
//! linear function of the predetermined ones, so the regressors are
//! rank-deficient and any (F_1n, F_1m) on the same manifold produces the
//! same data: the jump-variable coefficients are not identified. Under
//! commitment the state (k, mu_q) spans full rank and the rule is
//! recovered exactly.
//!
//! ```text
//! cargo run --example identification
//! ```

mod common;

use nalgebra::DVector;
use relq::analysis::{identification_experiment_bk, identification_experiment_commitment};
use relq::bk::select_manifold;
use relq::commitment::identify_rule_from_spectrum;
use relq::{solve_commitment, PolicyRule, RuleKind, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();
    let k0 = DVector::from_vec(vec![1.0]);

    // An "augmented" rule reacting to the jump variable...
    let augmented = PolicyRule::from_slice(&[0.0], &[1.0], RuleKind::AdHoc);
    let manifold = select_manifold(&model, &augmented, &tol).unwrap();
    let report =
        identification_experiment_bk(&model, &augmented, &manifold.n_matrix, &k0, 200, &tol)
            .unwrap();
    println!("augmented rule (F_1n, F_1m) = (0, 1)");
    println!(
        "observationally equivalent restriction: ({:+.8}, 0)",
        report.restricted_rule.f_k[0]
    );
    println!(
        "max difference between the two instrument paths: {:.3e}",
        report.r_max_diff
    );
    println!(
        "regressor rank {} of {} (deficiency {}) -> F_1m not recoverable",
        report.regressor_rank,
        model.dim(),
        report.rank_deficiency
    );

    // ...versus the commitment rule, recovered from simulated data.
    let sol = solve_commitment(&model, &tol).unwrap();
    let rec = identification_experiment_commitment(&model, &sol, &k0, 500, 42, &tol).unwrap();
    println!(
        "\ncommitment rule Phi = {:?}",
        sol.phi.iter().collect::<Vec<_>>()
    );
    println!(
        "least-squares recovery: {:?} (max error {:.3e}, rank {})",
        rec.recovered_phi.iter().collect::<Vec<_>>(),
        rec.max_coefficient_error,
        rec.regressor_rank
    );

    // The closed-loop spectrum pins F uniquely (pole placement round trip).
    let gain = identify_rule_from_spectrum(
        &model.a,
        &model.b,
        &sol.riccati.closed_loop_eigenvalues,
        &tol,
    )
    .unwrap();
    println!(
        "spectrum -> gain round trip error: {:.3e}",
        (&gain - &sol.f).abs().max()
    );
}
