//! Kalman's rank test: can the single instrument steer every state
//! direction? Full rank is the precondition for both the commitment
//! solve and arbitrary eigenvalue placement.
//!
//! ```text
//! cargo run --example controllability
//! ```

mod common;

use nalgebra::DMatrix;
use relq::{controllability, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();

    let report = controllability(&model.a, &model.b, &tol).unwrap();
    println!(
        "desk model: rank {} of {} -> controllable: {}",
        report.rank, report.dim, report.full
    );
    println!("singular values: {:?}", report.singular_values);

    // Decouple the jump variable from the instrument: the rank drops and
    // every solver downstream refuses.
    let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 1.2]);
    let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let broken = controllability(&a, &b, &tol).unwrap();
    println!(
        "decoupled variant: rank {} of {} -> controllable: {}",
        broken.rank, broken.dim, broken.full
    );
}
