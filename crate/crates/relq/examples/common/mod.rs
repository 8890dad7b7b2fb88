//! Shared helpers for the runnable examples.

use relq::ModelSpec;
use std::path::PathBuf;

/// The two-variable desk model used across the examples: one
/// predetermined and one jump variable, an unstable open loop, and mild
/// preference for stabilizing k.
pub fn desk_model() -> ModelSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/desk1.json");
    relq::load_model(&path).expect("bundled fixture is valid")
}

#[allow(dead_code)]
pub fn print_matrix(name: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{name} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:>12.8}", m[(i, j)]))
            .collect();
        println!("  [{}]", row.join(", "));
    }
}
