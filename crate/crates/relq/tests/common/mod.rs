//! Shared oracles and instance generators for the integration suites.
//!
//! The oracles here are written independently of the library code they
//! check: value iteration is a plain loop over the Riccati map, and the
//! residual is recomputed from scratch rather than trusted from the
//! solution object.

// Each test binary compiles this module separately and uses a subset.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relq::{ModelSpec, Tolerances};
use std::path::PathBuf;

pub fn desk1_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/desk1.json")
}

pub fn desk1() -> ModelSpec {
    relq::load_model(&desk1_path()).expect("bundled fixture is valid")
}

/// Independent value-iteration oracle: iterate
/// P <- Q + b A'PA - b A'PB (rho + b B'PB)^{-1} b B'PA from P0 = I until
/// the step falls below `step_tol` relative to 1 + max|P|.
pub fn value_iteration_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    rho: f64,
    beta: f64,
    step_tol: f64,
    max_iter: usize,
) -> Option<DMatrix<f64>> {
    let mut p = DMatrix::<f64>::identity(a.nrows(), a.ncols());
    for _ in 0..max_iter {
        let next = riccati_rhs(&p, a, b, q, rho, beta);
        let step = (&next - &p).abs().max();
        let scale = 1.0 + p.abs().max();
        p = next;
        if step < step_tol * scale {
            return Some(p);
        }
    }
    None
}

/// Right-hand side of the Riccati equation, written out directly.
pub fn riccati_rhs(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    rho: f64,
    beta: f64,
) -> DMatrix<f64> {
    let denom = rho + beta * (b.transpose() * p * b)[(0, 0)];
    let next = q + beta * (a.transpose() * p * a)
        - (a.transpose() * p * b) * (b.transpose() * p * a) * (beta * beta / denom);
    (&next + next.transpose()) * 0.5
}

/// Max-norm residual of the Riccati equation relative to 1 + max|P|.
pub fn dare_residual_relative(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    rho: f64,
    beta: f64,
) -> f64 {
    (&riccati_rhs(p, a, b, q, rho, beta) - p).abs().max() / (1.0 + p.abs().max())
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0) * scale)
}

pub fn rand_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let c = rand_matrix(rng, d, d, 1.0);
    (&c * c.transpose()) / d as f64
}

/// Random controllable pair with A scaled by `a_scale`.
pub fn rand_controllable(
    rng: &mut ChaCha8Rng,
    d: usize,
    a_scale: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let tol = Tolerances::default();
    loop {
        let a = rand_matrix(rng, d, d, a_scale);
        let b = rand_matrix(rng, d, 1, 1.0);
        if relq::controllability(&a, &b, &tol).unwrap().full {
            return (a, b);
        }
    }
}

/// A model around a transition matrix, with everything else generic.
pub fn model_around(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    n: usize,
    m: usize,
    beta: f64,
) -> ModelSpec {
    ModelSpec {
        n,
        m,
        beta,
        rho: 1.0,
        a,
        b,
        q,
        gamma: None,
        z_path: None,
        k_star: DVector::from_element(n, 1.0),
        q_star: DVector::from_element(m, 1.0),
        r_star: 0.0,
        var_names: None,
    }
}
