//! Over-stable rules satisfy the Blanchard-Kahn count in more than one
//! way: each admissible choice of n stable eigenvalues is its own
//! equilibrium with its own N. Software that silently picks one hides
//! the indeterminacy; the enumeration here lists them all.
//!
//! ```text
//! cargo run --example enumerate_equilibria
//! ```

mod common;

use nalgebra::DMatrix;
use relq::bk::enumerate_equilibria;
use relq::{ModelSpec, PolicyRule, Tolerances};

fn main() {
    let tol = Tolerances::default();

    // Both eigenvalues (0.2 and 0.5) are stable while only one variable
    // is predetermined, so there are binomial(2, 1) = 2 equilibria. The
    // eigenvector slopes are 1 and 2 by construction.
    let model = ModelSpec {
        a: DMatrix::from_row_slice(2, 2, &[-0.1, 0.3, -0.6, 0.8]),
        ..common_two_var()
    };
    let set = enumerate_equilibria(&model, &PolicyRule::zero(1, 1), &tol).unwrap();
    println!(
        "case {:?}: {} candidate subsets (upper bound {})",
        set.case, set.count_formula, set.upper_bound
    );
    for sol in &set.solutions {
        println!(
            "  subset {:?}: N = {:+.8}, conditioning {:.2e}",
            sol.subset,
            sol.n_matrix[(0, 0)],
            sol.conditioning
        );
    }
    for rej in &set.rejected {
        println!("  subset {:?} rejected: {}", rej.subset, rej.reason);
    }
    if let Some(gap) = set.min_n_gap {
        println!("smallest gap between the N matrices: {gap:.6}");
    }

    // A complex pair cannot be split across the stable set: every subset
    // that tries is rejected, so this model has no admissible real N.
    let rotation = ModelSpec {
        a: DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]),
        ..common_two_var()
    };
    let set = enumerate_equilibria(&rotation, &PolicyRule::zero(1, 1), &tol).unwrap();
    println!(
        "\nrotation model: {} admissible, {} rejected of {}",
        set.solutions.len(),
        set.rejected.len(),
        set.count_formula
    );
    for rej in &set.rejected {
        println!("  subset {:?}: {}", rej.subset, rej.reason);
    }
}

fn common_two_var() -> ModelSpec {
    let mut model = common::desk_model();
    model.beta = 1.0;
    model.q = DMatrix::identity(2, 2);
    model.var_names = None;
    model
}
