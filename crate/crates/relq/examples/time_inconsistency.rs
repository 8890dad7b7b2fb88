//! The re-optimization temptation: a planner who restarts at date t
//! would reset the jump variables' multipliers to zero, causing a jump
//! in q. The reset path stays bounded, so breaking the promise is
//! tempting rather than destabilizing — the reason commitment needs a
//! commitment device.
//!
//! ```text
//! cargo run --example time_inconsistency
//! ```

mod common;

use nalgebra::DVector;
use relq::commitment::time_inconsistency_probe;
use relq::{solve_commitment, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = common::desk_model();
    let sol = solve_commitment(&model, &tol).unwrap();
    let k0 = DVector::from_vec(vec![1.0]);

    for reset_time in [0, 5, 20] {
        let probe = time_inconsistency_probe(&sol, &model, &k0, reset_time, 400, &tol).unwrap();
        println!("reset at t = {reset_time}:");
        println!(
            "  q jumps {:+.10} -> {:+.10} (norm {:.3e})",
            probe.q_before[0], probe.q_after[0], probe.jump_norm
        );
        println!(
            "  reset path growth exponent {:.6} (bounded: {})",
            probe.reset_boundedness.growth_exponent, probe.reset_boundedness.bound_satisfied
        );
        println!(
            "  continuation loss {:.10} vs reset loss {:.10} (gain {:.3e})",
            probe.continuation_loss, probe.reset_loss, -probe.loss_difference
        );
    }
}
