//! Discounted discrete algebraic Riccati equation and the induced
//! feedback gain.
//!
//! The fixed point solved here is
//!
//! ```text
//! P = Q + beta A'PA - beta A'PB (rho + beta B'PB)^{-1} beta B'PA
//! F = beta (rho + beta B'PB)^{-1} B'PA
//! ```
//!
//! iterated from `P_0 = I`. The identity seed matters: with `Q = 0` (the
//! minimal-volatility preference) the map also has the non-stabilizing
//! fixed point `P = 0`, and only a positive-definite seed converges to
//! the stabilizing solution. `P` is simultaneously the value matrix of
//! the discounted loss: the loss from state `y0` is `y0' P y0`.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::config::Tolerances;
use crate::error::RiccatiError;
use crate::spectral;

/// Stabilizing solution of the discounted DARE with its gain.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// Symmetric positive semi-definite value matrix.
    pub p: DMatrix<f64>,
    /// Feedback gain row, `r - r* = -F y`.
    pub f: RowDVector<f64>,
    /// Max-norm residual of the Riccati equation at `p`.
    pub residual: f64,
    /// Eigenvalues of `A - B F`, sorted by modulus.
    pub closed_loop_eigenvalues: Vec<Complex<f64>>,
    /// Fixed-point iterations used.
    pub iterations: u64,
}

impl RiccatiSolution {
    /// Infinite-horizon discounted loss from `y0` under the closed loop.
    pub fn loss_of_state(&self, y0: &DVector<f64>) -> f64 {
        loss_of_state(&self.p, y0)
    }
}

/// Quadratic-form value `y0' P y0`.
pub fn loss_of_state(p: &DMatrix<f64>, y0: &DVector<f64>) -> f64 {
    assert_eq!(
        p.nrows(),
        y0.len(),
        "state dimension must match the value matrix"
    );
    (y0.transpose() * p * y0)[0]
}

/// One application of the Riccati map; also used to measure residuals.
fn riccati_map(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    rho: f64,
    beta: f64,
) -> DMatrix<f64> {
    let bpb = (b.transpose() * p * b)[(0, 0)];
    let denom = rho + beta * bpb;
    let bpa = b.transpose() * p * a; // 1 x d
    let apb = a.transpose() * p * b; // d x 1
    let next = q + beta * (a.transpose() * p * a) - (&apb * &bpa) * (beta * beta / denom);
    // Symmetrize to stop rounding drift from accumulating.
    (&next + next.transpose()) * 0.5
}

/// Gain induced by a value matrix.
fn gain_from(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rho: f64,
    beta: f64,
) -> RowDVector<f64> {
    let bpb = (b.transpose() * p * b)[(0, 0)];
    let bpa = b.transpose() * p * a;
    RowDVector::from_iterator(a.ncols(), bpa.iter().map(|x| beta * x / (rho + beta * bpb)))
}

/// Solves the discounted DARE by fixed-point iteration from the identity.
///
/// Refuses when `(sqrt(beta) A, sqrt(beta) B)` fails the Kalman rank
/// test; errors when the iteration stalls or the fixed point fails to
/// pull every closed-loop modulus strictly below `1/sqrt(beta)` (the
/// symptom of a detectability failure that no seed can cure).
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    rho: f64,
    beta: f64,
    tol: &Tolerances,
) -> Result<RiccatiSolution, RiccatiError> {
    let d = a.nrows();
    if !a.is_square() || b.nrows() != d || b.ncols() != 1 || q.nrows() != d || q.ncols() != d {
        return Err(RiccatiError::Dimension(format!(
            "A {}x{}, B {}x{}, Q {}x{} are inconsistent",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }

    let sqrt_beta = beta.sqrt();
    let report = spectral::controllability(&(a * sqrt_beta), &(b * sqrt_beta), tol)
        .map_err(|e| RiccatiError::Dimension(e.to_string()))?;
    if !report.full {
        return Err(RiccatiError::NotControllable { report });
    }

    let mut p = DMatrix::<f64>::identity(d, d);
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;
    loop {
        let next = riccati_map(&p, a, b, q, rho, beta);
        let last_step = (&next - &p).abs().max();
        iterations += 1;
        let scale = 1.0 + p.abs().max();
        p = next;
        if last_step < tol.dare_step * scale {
            last_residual = (&riccati_map(&p, a, b, q, rho, beta) - &p).abs().max();
            if last_residual < tol.dare_residual * (1.0 + p.abs().max()) {
                break;
            }
        }
        if iterations >= tol.dare_max_iter {
            return Err(RiccatiError::NoConvergence {
                iterations,
                last_step,
                last_residual,
            });
        }
    }

    let f = gain_from(&p, a, b, rho, beta);
    let closed = a - b * &f;
    let eigs = closed.clone().complex_eigenvalues();
    let mut closed_loop_eigenvalues: Vec<Complex<f64>> = eigs.iter().copied().collect();
    closed_loop_eigenvalues.sort_by(|x, y| {
        (x.norm(), x.re, x.im)
            .partial_cmp(&(y.norm(), y.re, y.im))
            .expect("finite eigenvalues")
    });

    let threshold = 1.0 / sqrt_beta;
    let max_modulus = closed_loop_eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(0.0f64, f64::max);
    if max_modulus >= threshold - tol.stabilizing_margin {
        return Err(RiccatiError::NotStabilizing {
            max_modulus,
            threshold,
        });
    }

    Ok(RiccatiSolution {
        p,
        f,
        residual: last_residual,
        closed_loop_eigenvalues,
        iterations,
    })
}
