//! Interest-rate smoothing: eliminate the multiplier from the
//! commitment rule and express it on observables (r_{t-1}, k_t, k_{t-1}).
//! The 2n+1 coefficients generally over-parameterize the n+m
//! eigenvalues they encode, which is why this form resists
//! identification.
//!
//! ```text
//! cargo run --example history_rule
//! ```

mod common;

use nalgebra::DVector;
use relq::commitment::build_history_rule;
use relq::{solve_commitment, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();
    let sol = solve_commitment(&model, &tol).unwrap();
    let psi = build_history_rule(&sol, &model, &tol).unwrap();

    println!("r_t = psi_r r_(t-1) + psi_k0 k_t + psi_k1 k_(t-1)");
    println!("  psi_r  = {:+.12}", psi.psi_r);
    println!("  psi_k0 = {:+.12}", psi.psi_k0[0]);
    println!("  psi_k1 = {:+.12}", psi.psi_k1[0]);
    println!(
        "  {} coefficients for {} eigenvalues -> identified: {}",
        psi.parameter_count,
        model.dim(),
        psi.identified
    );

    // Replay the rule along the committed path and measure the residual.
    let mut state = DVector::from_vec(vec![1.0, 0.0]);
    let mut prev_k = state.rows(0, 1).into_owned();
    let mut prev_r = (&sol.phi * &state)[0];
    let mut worst = 0.0f64;
    for _ in 1..500 {
        state = &sol.t_closed * &state;
        let k_t = state.rows(0, 1).into_owned();
        let r_t = (&sol.phi * &state)[0];
        worst = worst.max((psi.replay(prev_r, &k_t, &prev_k) - r_t).abs());
        prev_k = k_t;
        prev_r = r_t;
    }
    println!("max replay residual over 500 periods: {worst:.3e}");
}
