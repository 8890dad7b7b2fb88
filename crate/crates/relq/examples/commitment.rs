//! Optimal policy under commitment: solve the Stackelberg problem "as if
//! q were predetermined", then read the rule off the true predetermined
//! state (k, mu_q).
//!
//! ```text
//! cargo run --example commitment
//! ```

mod common;

use nalgebra::DVector;
use relq::analysis::{boundedness_of, simulate, SimLaw};
use relq::{solve_commitment, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();

    let sol = solve_commitment(&model, &tol).unwrap();
    common::print_matrix("P", &sol.p);
    println!(
        "F   (as if q predetermined) = {:?}",
        sol.f.iter().collect::<Vec<_>>()
    );
    println!(
        "Phi (on k, mu_q)            = {:?}",
        sol.phi.iter().collect::<Vec<_>>()
    );
    common::print_matrix("T (closed loop on (k, mu_q))", &sol.t_closed);
    common::print_matrix("q0 map (-P_mm^-1 P_mn)", &sol.q0_map);
    println!(
        "FOC residuals along the path: r-equation {:.3e}, y-equation {:.3e}",
        sol.foc_residuals.0, sol.foc_residuals.1
    );

    // Determinate start: mu_q,0 = 0 pins q_0 as a function of k_0.
    let k0 = DVector::from_vec(vec![1.0]);
    let y0 = sol.initial_state(&k0);
    println!("\nk0 = 1 -> q0 = {:.12}", y0[1]);
    println!("commitment loss from k0: {:.12}", sol.loss_from_k0(&k0));

    let mut initial = DVector::zeros(2);
    initial[0] = k0[0];
    let traj = simulate(&model, &SimLaw::commitment(&sol), &initial, 500, &tol).unwrap();
    let bound = boundedness_of(&traj, model.beta, &tol);
    println!(
        "simulated loss {:.12}, growth exponent {:.6} < log threshold {:.6}: {}",
        traj.discounted_loss, bound.growth_exponent, bound.log_threshold, bound.bound_satisfied
    );
}
