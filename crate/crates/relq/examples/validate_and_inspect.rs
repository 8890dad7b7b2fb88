//! Load a model file, validate it, and round-trip the canonical form.
//!
//! ```text
//! cargo run --example validate_and_inspect
//! ```

mod common;

use relq::{validate_model, Tolerances};

fn main() {
    let model = common::desk_model();
    let tol = Tolerances::default();

    let report = validate_model(&model, &tol);
    println!("valid: {}", report.is_valid());
    println!("deviation modes: {:?}", report.deviation_modes);

    println!(
        "state: n = {} predetermined + m = {} jump variables ({})",
        model.n,
        model.m,
        model.labels().join(", ")
    );
    println!("beta = {}, rho = {}", model.beta, model.rho);
    common::print_matrix("A", &model.a);
    common::print_matrix("B", &model.b);
    common::print_matrix("Q", &model.q);

    println!("digest: {}", relq::report::model_digest(&model));
    println!("\ncanonical form:\n{}", model.canonical_json());
}
