//! The Blanchard-Kahn saddle path: jump variables sit on q = -N k, and
//! the policy problem collapses to the predetermined block.
//!
//! ```text
//! cargo run --example saddle_path
//! ```

mod common;

use nalgebra::DVector;
use relq::analysis::{simulate, SimLaw};
use relq::bk::{build_n, classify_bk, manifold_residual, solve_quasi_optimal};
use relq::{PolicyRule, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();

    let open_loop = PolicyRule::zero(model.n, model.m);
    let (case, split) = classify_bk(&model, &open_loop, &tol).unwrap();
    println!(
        "open-loop case: {case:?} ({} stable of {})",
        split.n_s,
        split.dim()
    );

    let sol = build_n(&model, &split, &[0], &tol).unwrap();
    common::print_matrix("N", &sol.n_matrix);
    println!(
        "manifold identity residual: {:.3e} (conditioning of M_mm: {:.3e})",
        manifold_residual(&split.matrix, &sol.n_matrix, model.n, model.m),
        sol.conditioning
    );
    common::print_matrix("A' (reduced)", &sol.a_reduced);
    common::print_matrix("Q' (reduced)", &sol.q_reduced);

    let quasi = solve_quasi_optimal(&model, &sol.n_matrix, &tol).unwrap();
    println!("quasi-optimal F' = {:.12}", quasi.riccati.f[0]);
    println!(
        "reduced closed loop: {:.12}",
        quasi.riccati.closed_loop_eigenvalues[0].re
    );

    // The equilibrium path: k from the reduced loop, q lifted by -N.
    let law = SimLaw::quasi_optimal(&model, &quasi, &sol.n_matrix);
    let traj = simulate(&model, &law, &DVector::from_vec(vec![1.0]), 10, &tol).unwrap();
    println!("\n  t        k            q            r");
    for t in 0..traj.horizon {
        println!(
            "{t:>3}  {:>11.8}  {:>11.8}  {:>11.8}",
            traj.k[t][0], traj.q[t][0], traj.r[t]
        );
    }
}
