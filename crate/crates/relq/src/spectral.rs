//! Eigenstructure analysis of open- and closed-loop transition matrices,
//! and the Kalman controllability rank test.
//!
//! A [`SpectralSplit`] sorts the eigenvalues of a real square matrix by
//! modulus, classifies them against the stability threshold `1/sqrt(beta)`
//! and carries the matrix `M` of left eigenvector rows satisfying
//! `M G = Lambda M`. Because the rows follow the modulus order, the stable
//! block always comes first.
//!
//! Left eigenvectors are extracted one cluster at a time as null spaces of
//! `(G' - lambda I)` in complex arithmetic. A repeated eigenvalue whose
//! null space is too small is a defect: the construction downstream
//! assumes a diagonalizable closed loop, so this is reported as a hard
//! error naming the eigenvalue rather than silently degrading.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::SpectralError;

/// Kalman controllability test result.
#[derive(Clone, Debug, Serialize)]
pub struct ControllabilityReport {
    /// State dimension the test ran against.
    pub dim: usize,
    /// Numerical rank of [B, AB, ..., A^{d-1}B].
    pub rank: usize,
    /// True when rank == dim.
    pub full: bool,
    /// Singular values behind the rank decision.
    pub singular_values: Vec<f64>,
}

/// Eigenvalues of a matrix classified against 1/sqrt(beta), with the left
/// eigenvector rows reordered stable-first.
#[derive(Clone, Debug)]
pub struct SpectralSplit {
    /// Eigenvalues sorted by modulus ascending, ties by (re, im).
    pub eigenvalues: Vec<Complex<f64>>,
    /// Left-eigenvector rows, same order as `eigenvalues`.
    pub m: DMatrix<Complex<f64>>,
    /// Stable eigenvalues (modulus below threshold minus margin).
    pub lambda_stable: Vec<Complex<f64>>,
    /// Unstable eigenvalues (everything else, borderline included).
    pub lambda_unstable: Vec<Complex<f64>>,
    /// Stability threshold 1/sqrt(beta).
    pub threshold: f64,
    /// Number of stable eigenvalues.
    pub n_s: usize,
    /// Count against the plain unit circle, reported alongside `n_s`
    /// because the two thresholds differ whenever beta < 1.
    pub unit_stable_count: usize,
    /// Indices whose modulus sits within the margin of the threshold;
    /// these are classified unstable and flagged.
    pub borderline: Vec<usize>,
    /// True when all eigenvalues are pairwise distinct within tolerance.
    pub distinct: bool,
    /// True when a full eigenvector basis exists (always true on the
    /// success path; defects are errors).
    pub diagonalizable: bool,
    /// The analyzed matrix.
    pub matrix: DMatrix<f64>,
    /// Discount factor behind the threshold.
    pub beta: f64,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Indices of the stable eigenvalues (a prefix, by construction).
    pub fn stable_indices(&self) -> Vec<usize> {
        (0..self.n_s).collect()
    }

    /// Max elementwise residual of M G - Lambda M.
    pub fn left_eigen_residual(&self) -> f64 {
        let g = self.matrix.map(|x| Complex::new(x, 0.0));
        let mg = &self.m * &g;
        let mut worst = 0.0f64;
        for (i, lambda) in self.eigenvalues.iter().enumerate() {
            for j in 0..self.m.ncols() {
                let r = (mg[(i, j)] - lambda * self.m[(i, j)]).norm();
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// One open-loop/closed-loop eigenvalue pairing in the mirroring check.
#[derive(Clone, Debug, Serialize)]
pub struct MirrorPair {
    pub open_modulus: f64,
    pub closed_modulus: f64,
    /// Expected closed-loop modulus: unchanged for stable open-loop
    /// eigenvalues, reciprocal for unstable ones.
    pub expected_modulus: f64,
    pub residual: f64,
    /// True when this pairing used the reciprocal relation.
    pub mirrored: bool,
}

/// Result of matching the closed-loop spectrum against the minimal
/// volatility prediction: stable roots unchanged, unstable roots
/// reflected to reciprocal modulus.
#[derive(Clone, Debug, Serialize)]
pub struct MirrorReport {
    pub pairs: Vec<MirrorPair>,
    pub max_residual: f64,
    pub pass: bool,
}

/// Builds [B, AB, A^2 B, ..., A^{d-1}B] and ranks it by singular values
/// with the relative threshold `sigma_max * d * rank_rel`. Full rank is
/// the Kalman condition for arbitrary eigenvalue placement.
pub fn controllability(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<ControllabilityReport, SpectralError> {
    if !a.is_square() {
        return Err(SpectralError::Dimension(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() || b.ncols() == 0 {
        return Err(SpectralError::Dimension(format!(
            "B must be {}x1, got {}x{}",
            a.nrows(),
            b.nrows(),
            b.ncols()
        )));
    }
    let d = a.nrows();
    let p = b.ncols();
    let mut k = DMatrix::zeros(d, d * p);
    let mut block = b.clone();
    for j in 0..d {
        k.view_mut((0, j * p), (d, p)).copy_from(&block);
        if j + 1 < d {
            block = a * &block;
        }
    }
    let (rank, singular_values) = numerical_rank(&k, d, tol.rank_rel);
    Ok(ControllabilityReport {
        dim: d,
        rank,
        full: rank == d,
        singular_values,
    })
}

/// Numerical rank of a matrix: count of singular values above
/// `sigma_max * scale_dim * rel`. Returns the singular values too.
pub fn numerical_rank(m: &DMatrix<f64>, scale_dim: usize, rel: f64) -> (usize, Vec<f64>) {
    let svals = m.clone().singular_values();
    let sigma_max = svals.max();
    let threshold = sigma_max * scale_dim as f64 * rel;
    let rank = svals.iter().filter(|&&s| s > threshold).count();
    (rank, svals.iter().copied().collect())
}

/// Eigendecomposition with stability classification. Errors on defective
/// matrices, naming the offending eigenvalue.
pub fn spectral_split(
    matrix: &DMatrix<f64>,
    beta: f64,
    tol: &Tolerances,
) -> Result<SpectralSplit, SpectralError> {
    if !matrix.is_square() {
        return Err(SpectralError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let threshold = 1.0 / beta.sqrt();
    let (eigenvalues, m, distinct) = eigendecompose(matrix, tol)?;

    let margin = tol.stability_margin;
    let n_s = eigenvalues
        .iter()
        .filter(|l| l.norm() < threshold - margin)
        .count();
    let unit_stable_count = eigenvalues
        .iter()
        .filter(|l| l.norm() < 1.0 - margin)
        .count();
    let borderline = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| (l.norm() - threshold).abs() <= margin)
        .map(|(i, _)| i)
        .collect();
    let lambda_stable = eigenvalues[..n_s].to_vec();
    let lambda_unstable = eigenvalues[n_s..].to_vec();

    Ok(SpectralSplit {
        eigenvalues,
        m,
        lambda_stable,
        lambda_unstable,
        threshold,
        n_s,
        unit_stable_count,
        borderline,
        distinct,
        diagonalizable: true,
        matrix: matrix.clone(),
        beta,
    })
}

/// Matches the two spectra under the minimal-volatility relation: each
/// stable open-loop modulus should reappear unchanged, each unstable one
/// should reappear as its reciprocal. Classification side comes from the
/// open-loop split; pairing is greedy nearest-modulus.
pub fn eigenvalue_mirror_check(
    open_loop: &SpectralSplit,
    closed_loop: &SpectralSplit,
    tol: &Tolerances,
) -> Result<MirrorReport, SpectralError> {
    if open_loop.dim() != closed_loop.dim() {
        return Err(SpectralError::Dimension(format!(
            "spectra have different sizes: {} vs {}",
            open_loop.dim(),
            closed_loop.dim()
        )));
    }
    let mut taken = vec![false; closed_loop.dim()];
    let mut pairs = Vec::with_capacity(open_loop.dim());
    let mut max_residual = 0.0f64;
    for (i, lambda) in open_loop.eigenvalues.iter().enumerate() {
        let open_modulus = lambda.norm();
        let mirrored = i >= open_loop.n_s;
        let expected = if mirrored {
            1.0 / open_modulus
        } else {
            open_modulus
        };
        let mut best: Option<(usize, f64)> = None;
        for (j, mu) in closed_loop.eigenvalues.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let r = (mu.norm() - expected).abs();
            if best.is_none_or(|(_, rb)| r < rb) {
                best = Some((j, r));
            }
        }
        let (j, residual) = best.expect("closed-loop spectrum has as many entries as open-loop");
        taken[j] = true;
        max_residual = max_residual.max(residual);
        pairs.push(MirrorPair {
            open_modulus,
            closed_modulus: closed_loop.eigenvalues[j].norm(),
            expected_modulus: expected,
            residual,
            mirrored,
        });
    }
    Ok(MirrorReport {
        pairs,
        max_residual,
        pass: max_residual < tol.mirror,
    })
}

/// Casts a complex matrix to real, erroring when any imaginary part
/// exceeds the residual tolerance (the symptom of a conjugate pair split
/// across the stable set).
pub fn to_real_checked(
    m: &DMatrix<Complex<f64>>,
    max_imag: f64,
) -> Result<DMatrix<f64>, SpectralError> {
    let residual = m.iter().map(|c| c.im.abs()).fold(0.0f64, f64::max);
    if residual > max_imag {
        return Err(SpectralError::ComplexResidual { residual });
    }
    Ok(m.map(|c| c.re))
}

/// 2-norm condition number of a complex matrix.
pub fn condition_number(m: &DMatrix<Complex<f64>>) -> f64 {
    let svals = m.clone().singular_values();
    let max = svals.max();
    let min = svals.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// 2-norm condition number of a real matrix.
pub fn condition_number_real(m: &DMatrix<f64>) -> f64 {
    let svals = m.clone().singular_values();
    let max = svals.max();
    let min = svals.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Sorted eigenvalues, left-eigenvector rows, and the distinctness flag.
type LeftEigen = (Vec<Complex<f64>>, DMatrix<Complex<f64>>, bool);

/// Eigenvalues (sorted by modulus, ties by (re, im)) and unit-norm left
/// eigenvector rows. Near-coincident eigenvalues are clustered and
/// replaced by their cluster mean so each row satisfies its eigenvalue
/// equation within `tol.eig_residual`.
fn eigendecompose(g: &DMatrix<f64>, tol: &Tolerances) -> Result<LeftEigen, SpectralError> {
    let d = g.nrows();
    let schur = nalgebra::linalg::Schur::try_new(g.clone(), f64::EPSILON, 100_000)
        .ok_or(SpectralError::EigenFailure)?;
    let raw = schur.complex_eigenvalues();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        let ki = (raw[i].norm(), raw[i].re, raw[i].im);
        let kj = (raw[j].norm(), raw[j].re, raw[j].im);
        ki.partial_cmp(&kj).expect("eigenvalues are finite")
    });
    let mut eigenvalues: Vec<Complex<f64>> = order.iter().map(|&i| raw[i]).collect();

    let scale = eigenvalues.iter().map(|l| l.norm()).fold(0.0f64, f64::max);
    let cluster_tol = tol.distinctness * scale;
    let clusters = cluster_indices(&eigenvalues, cluster_tol);
    let distinct = clusters.iter().all(|c| c.len() == 1);

    // Replace each cluster by its mean so repeated roots are exactly equal.
    for cluster in &clusters {
        if cluster.len() > 1 {
            let mean = cluster
                .iter()
                .map(|&i| eigenvalues[i])
                .sum::<Complex<f64>>()
                / cluster.len() as f64;
            for &i in cluster {
                eigenvalues[i] = mean;
            }
        }
    }

    let gt = g.transpose().map(|x| Complex::new(x, 0.0));
    let null_tol = tol.eig_residual * scale.max(1.0);
    let mut m = DMatrix::<Complex<f64>>::zeros(d, d);
    for cluster in &clusters {
        let lambda = eigenvalues[cluster[0]];
        let mut shifted = gt.clone();
        for i in 0..d {
            shifted[(i, i)] -= lambda;
        }
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let needed = cluster.len();
        // Smallest singular values sit at the end after sorting.
        let small = svd
            .singular_values
            .iter()
            .filter(|&&s| s <= null_tol)
            .count();
        if small < needed {
            return Err(SpectralError::Defective {
                re: lambda.re,
                im: lambda.im,
                geometric: small,
                algebraic: needed,
            });
        }
        for (slot, &row_index) in cluster.iter().enumerate() {
            // Null vector x of (G' - lambda I) gives the left eigenvector
            // row w = x' (transpose without conjugation).
            let x_conj = v_t.row(d - 1 - slot);
            for j in 0..d {
                m[(row_index, j)] = x_conj[j].conj();
            }
        }
    }

    Ok((eigenvalues, m, distinct))
}

/// Groups indices whose eigenvalues lie within `cluster_tol` of each
/// other (transitively).
fn cluster_indices(eigenvalues: &[Complex<f64>], cluster_tol: f64) -> Vec<Vec<usize>> {
    let d = eigenvalues.len();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if (eigenvalues[i] - eigenvalues[j]).norm() <= cluster_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); d];
    for i in 0..d {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}
