//! The discounted algebraic Riccati equation behind every optimal rule
//! here, plus the minimal-volatility special case in closed form.
//!
//! ```text
//! cargo run --example riccati
//! ```

mod common;

use nalgebra::{DMatrix, DVector};
use relq::{loss_of_state, solve_dare, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();

    let sol = solve_dare(&model.a, &model.b, &model.q, model.rho, model.beta, &tol).unwrap();
    common::print_matrix("P", &sol.p);
    println!("F = {:?}", sol.f.iter().collect::<Vec<_>>());
    println!(
        "residual {:.3e} after {} iterations",
        sol.residual, sol.iterations
    );
    println!(
        "closed-loop moduli: {:?}",
        sol.closed_loop_eigenvalues
            .iter()
            .map(|l| l.norm())
            .collect::<Vec<_>>()
    );
    let y0 = DVector::from_vec(vec![1.0, 0.0]);
    println!("loss from y0 = (1, 0): {:.12}", loss_of_state(&sol.p, &y0));

    // Pure volatility minimization (Q = 0): the unstable root 2 gets
    // mirrored to 1/2 and P has the closed form rho (beta a^2 - 1) / (beta b^2).
    let a = DMatrix::from_row_slice(1, 1, &[2.0]);
    let b = DMatrix::from_row_slice(1, 1, &[1.0]);
    let q = DMatrix::zeros(1, 1);
    let minvol = solve_dare(&a, &b, &q, 1.0, 1.0, &tol).unwrap();
    println!(
        "\nminimal volatility, scalar a = 2: P = {:.12}, F = {:.12}, closed loop = {:.12}",
        minvol.p[(0, 0)],
        minvol.f[0],
        minvol.closed_loop_eigenvalues[0].re
    );
}
