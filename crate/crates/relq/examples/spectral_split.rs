//! Eigenvalues of the open loop classified against 1/sqrt(beta), and the
//! left-eigenvector identity they satisfy.
//!
//! ```text
//! cargo run --example spectral_split
//! ```

mod common;

use relq::{spectral_split, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();

    let split = spectral_split(&model.a, model.beta, &tol).unwrap();
    println!("threshold 1/sqrt(beta) = {:.12}", split.threshold);
    for (i, lambda) in split.eigenvalues.iter().enumerate() {
        let side = if i < split.n_s { "stable" } else { "unstable" };
        println!(
            "  lambda_{i} = {:.12} {:+.12}i  |lambda| = {:.12}  ({side})",
            lambda.re,
            lambda.im,
            lambda.norm()
        );
    }
    println!(
        "{} stable of {} (against the unit circle: {})",
        split.n_s,
        split.dim(),
        split.unit_stable_count
    );
    println!(
        "distinct: {}, diagonalizable: {}",
        split.distinct, split.diagonalizable
    );
    println!(
        "max residual of M(A-BF) = Lambda M: {:.3e}",
        split.left_eigen_residual()
    );
}
