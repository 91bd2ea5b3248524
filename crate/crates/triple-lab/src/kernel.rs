//! Dense complex linear-algebra primitives shared by every module.
//!
//! Everything here works on dynamically sized matrices over `Complex64` at
//! desk scale (factor dimensions are capped well below 100), with an explicit
//! tolerance policy: all scalar comparisons use the combined test
//! `|x - y| <= abs + rel * max(|x|, |y|)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix, row-major semantics.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

/// Eigenvalues of `L(e,e)` for a tripotent are exactly `{0, 1/2, 1}`, so a
/// loose cluster width is safe for merging numerically split eigenvalues.
pub const EIGENVALUE_CLUSTER_WIDTH: f64 = 1e-6;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Numeric comparison policy: absolute and relative slack combined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self, KernelError> {
        if !abs.is_finite() || !rel.is_finite() || abs < 0.0 || rel < 0.0 {
            return Err(KernelError::InvalidTolerance { abs, rel });
        }
        Ok(Tolerance { abs, rel })
    }

    /// Uniform tolerance with equal absolute and relative slack.
    pub fn uniform(eps: f64) -> Result<Self, KernelError> {
        Tolerance::new(eps, eps)
    }

    /// Slack allowed when comparing quantities of the given magnitude.
    pub fn slack(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }

    pub fn close(&self, x: f64, y: f64) -> bool {
        (x - y).abs() <= self.slack(x.abs().max(y.abs()))
    }

    pub fn close_c(&self, x: Complex64, y: Complex64) -> bool {
        (x - y).norm() <= self.slack(x.norm().max(y.norm()))
    }

    /// Frobenius-norm closeness of two equal-shaped matrices.
    pub fn close_mat(&self, a: &CMat, b: &CMat) -> bool {
        debug_assert_eq!(a.shape(), b.shape());
        (a - b).norm() <= self.slack(a.norm().max(b.norm()))
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("input is not Hermitian: ||m - m'|| = {deviation:.3e} exceeds tolerance {allowed:.3e}")]
    NonHermitianInput { deviation: f64, allowed: f64 },
    #[error("dimension mismatch: expected {expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: String,
        rows: usize,
        cols: usize,
    },
    #[error("rank deficient: smallest singular value {smallest:.3e} below cutoff {cutoff:.3e}")]
    RankDeficient { smallest: f64, cutoff: f64 },
    #[error("tolerance components must be finite and nonnegative (abs={abs}, rel={rel})")]
    InvalidTolerance { abs: f64, rel: f64 },
}

/// Spectral decomposition of a Hermitian matrix with clustered eigenvalues.
///
/// Eigenvalues within [`EIGENVALUE_CLUSTER_WIDTH`] of each other are merged
/// into a single spectral projector. Eigenvalues are reported in descending
/// order; `projectors[i]` and `basis[i]` correspond to `eigenvalues[i]`.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMat>,
    /// Orthonormal basis of each eigenspace, one column per basis vector.
    pub basis: Vec<CMat>,
}

impl Eigensystem {
    pub fn multiplicity(&self, i: usize) -> usize {
        self.basis[i].ncols()
    }
}

/// Cyclic complex Jacobi eigendecomposition of a Hermitian matrix.
///
/// Returns unsorted eigenvalues and a unitary matrix of eigenvectors with
/// `m = V diag(lambda) V*`. Jacobi keeps eigenpairs aligned and eigenvectors
/// orthogonal even for highly degenerate spectra, which Peirce operators
/// always have.
pub fn jacobi_hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    let scale = a.norm().max(1.0);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / cr(apq.norm());
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (s, co) = theta.sin_cos();
                // G is the identity outside rows/cols p,q with
                // G[p,p] = G[q,q] = cos, G[p,q] = phase sin,
                // G[q,p] = -conj(phase) sin; update a <- G* a G, v <- v G.
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * cr(co) - aiq * phase.conj() * cr(s);
                    a[(i, q)] = aip * phase * cr(s) + aiq * cr(co);
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * cr(co) - viq * phase.conj() * cr(s);
                    v[(i, q)] = vip * phase * cr(s) + viq * cr(co);
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * cr(co) - aqj * phase * cr(s);
                    a[(q, j)] = apj * phase.conj() * cr(s) + aqj * cr(co);
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Returns eigenvalues in descending order with one projector per cluster of
/// nearly equal eigenvalues. The projectors are Hermitian, idempotent,
/// mutually annihilating, and sum to the identity.
pub fn hermitian_eigensystem(m: &CMat, tol: &Tolerance) -> Result<Eigensystem, KernelError> {
    if m.nrows() != m.ncols() {
        return Err(KernelError::DimensionMismatch {
            expected: "square matrix".into(),
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let deviation = (m - m.adjoint()).norm();
    let allowed = tol.slack(m.norm());
    if deviation > allowed {
        return Err(KernelError::NonHermitianInput { deviation, allowed });
    }
    // Symmetrize to suppress the (already tolerated) non-Hermitian noise.
    let h = (m + m.adjoint()).scale(0.5);
    let (evals, evecs) = jacobi_hermitian_eigen(&h);

    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        evals[j]
            .partial_cmp(&evals[i])
            .expect("eigenvalues of a Hermitian matrix are finite")
    });

    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    let mut basis = Vec::new();
    let mut k = 0;
    while k < n {
        let mut cluster = vec![order[k]];
        // Chain-merge: adjacent gaps below the cluster width collapse.
        while k + cluster.len() < n {
            let next = order[k + cluster.len()];
            let prev = *cluster.last().unwrap();
            if (evals[prev] - evals[next]).abs() <= EIGENVALUE_CLUSTER_WIDTH {
                cluster.push(next);
            } else {
                break;
            }
        }
        let mean = cluster.iter().map(|&i| evals[i]).sum::<f64>() / cluster.len() as f64;
        let mut vectors = CMat::zeros(n, cluster.len());
        for (col, &i) in cluster.iter().enumerate() {
            vectors.set_column(col, &evecs.column(i));
        }
        let projector = &vectors * vectors.adjoint();
        eigenvalues.push(mean);
        projectors.push(projector);
        basis.push(vectors);
        k += cluster.len();
    }

    Ok(Eigensystem {
        eigenvalues,
        projectors,
        basis,
    })
}

/// Singular value decomposition `a = U diag(s) V*` built on the Jacobi
/// eigensolver, with `U: m x k`, `V: n x k`, `k = min(m, n)` and singular
/// values descending. Columns stay aligned with their singular values for
/// arbitrarily degenerate spectra; columns belonging to vanishing singular
/// values are completed deterministically from the standard basis.
pub fn svd_robust(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (m, n) = a.shape();
    if n > m {
        let (v, s, u) = svd_robust(&a.adjoint());
        return (u, s, v);
    }
    let k = n;
    let gram = a.adjoint() * a;
    let (evals, evecs) = jacobi_hermitian_eigen(&gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).expect("finite eigenvalues"));

    let largest = evals.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt();
    let cutoff = 1e-10 * largest.max(1.0);
    let mut svals = Vec::with_capacity(k);
    let mut vmat = CMat::zeros(n, k);
    let mut umat = CMat::zeros(m, k);
    let mut filled: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    for (col, &i) in order.iter().enumerate() {
        let sigma = evals[i].max(0.0).sqrt();
        svals.push(sigma);
        let vi = evecs.column(i).into_owned();
        vmat.set_column(col, &vi);
        if sigma > cutoff {
            let ui = (a * &vi).scale(1.0 / sigma);
            umat.set_column(col, &ui);
            filled.push(col);
        } else {
            pending.push(col);
        }
    }
    // Null directions: complete U with standard basis vectors orthogonal to
    // the columns already present.
    for col in pending {
        let mut chosen = None;
        for b in 0..m {
            let mut cand = CVec::zeros(m);
            cand[b] = cr(1.0);
            for &f in &filled {
                let u = umat.column(f).into_owned();
                let coeff = u.dotc(&cand);
                cand -= u.map(|z| z * coeff);
            }
            if cand.norm() > 0.5 / (m as f64) {
                chosen = Some(cand.normalize());
                break;
            }
        }
        let u = chosen.expect("an orthonormal completion always exists");
        umat.set_column(col, &u);
        filled.push(col);
    }
    (umat, svals, vmat)
}

/// Largest singular value; zero exactly when the matrix is zero.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.iter().all(|z| *z == Complex64::default()) {
        return 0.0;
    }
    let gram = if m.ncols() <= m.nrows() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    let (evals, _) = jacobi_hermitian_eigen(&gram);
    evals.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

/// Least-squares solution of `a * x = b` with a full-column-rank `a`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub solution: CMat,
    /// Frobenius norm of `a * solution - b`.
    pub residual: f64,
}

pub fn least_squares_solve(
    a: &CMat,
    b: &CMat,
    tol: &Tolerance,
) -> Result<LeastSquares, KernelError> {
    if a.nrows() != b.nrows() {
        return Err(KernelError::DimensionMismatch {
            expected: format!("{} rows to match the left-hand side", a.nrows()),
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    let (u, svals, v) = svd_robust(a);
    let largest = svals.iter().cloned().fold(0.0, f64::max);
    let smallest = svals.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = tol.slack(largest);
    if a.ncols() > a.nrows() || smallest <= cutoff {
        return Err(KernelError::RankDeficient {
            smallest: if smallest.is_finite() { smallest } else { 0.0 },
            cutoff,
        });
    }
    // x = V diag(1/sigma) U* b
    let mut ut_b = u.adjoint() * b;
    for (i, sigma) in svals.iter().enumerate() {
        for j in 0..ut_b.ncols() {
            ut_b[(i, j)] /= cr(*sigma);
        }
    }
    let solution = v * ut_b;
    let residual = (a * &solution - b).norm();
    Ok(LeastSquares { solution, residual })
}

/// Least-squares over the reals, used for realified linear fits.
pub fn least_squares_solve_real(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: &Tolerance,
) -> Result<(DMatrix<f64>, f64), KernelError> {
    let ac = a.map(cr);
    let bc = b.map(cr);
    let ls = least_squares_solve(&ac, &bc, tol)?;
    Ok((ls.solution.map(|z| z.re), ls.residual))
}
