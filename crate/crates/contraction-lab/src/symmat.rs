//! Symmetric-matrix core: eigendecomposition, Loewner comparisons, spectral
//! functional calculus, spectral projections, and the contraction
//! factorization primitive `S^{1/2} = x T^{1/2}`.
//!
//! The eigensolver is a cyclic Jacobi iteration (threshold 1e-12 on the
//! off-diagonal Frobenius mass, 100 sweep cap). Jacobi is slow for large
//! matrices but robust and deterministic, which is what this laboratory
//! needs: every downstream verdict must be reproducible bit-for-bit.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Convergence threshold on sqrt(2 * sum of squared off-diagonal entries).
const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Spectrum of a positive contraction may exceed [0, 1] by at most this much
/// before spectral operations refuse the input.
pub const SPECTRUM_EXCURSION_TOL: f64 = 1e-8;

/// Eigenvalues of `T^{1/2}` below `RANK_CUTOFF * lambda_max` are treated as
/// kernel when a pseudo-inverse is formed. The effective cutoff never drops
/// below the eigensolver noise floor `sqrt(dim * f64::EPSILON) * lambda_max`:
/// inverting past it turns roundoff into order-one garbage.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Dense real symmetric matrix; the numerical stand-in for a self-adjoint
/// operator. Symmetrized exactly on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    /// Symmetrize an arbitrary square matrix: entries become `(a_ij + a_ji)/2`.
    pub fn symmetrize(m: &Matrix) -> Self {
        let d = m.dim();
        let mut out = Matrix::zero(d);
        for i in 0..d {
            for j in i..d {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        SymMatrix { inner: out }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(SymMatrix::symmetrize(&Matrix::from_rows(rows)?))
    }

    pub fn zero(dim: usize) -> Self {
        SymMatrix {
            inner: Matrix::zero(dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            inner: Matrix::identity(dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix {
            inner: Matrix::diag(values),
        }
    }

    /// `q * diag(values) * q^T` for an orthogonal `q`.
    pub fn conjugated_diag(q: &Matrix, values: &[f64]) -> Self {
        assert_eq!(q.dim(), values.len());
        let qd = Matrix::from_fn(q.dim(), |i, j| q.get(i, j) * values[j]);
        SymMatrix::symmetrize(&qd.mul(&q.transpose()))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.inner.matvec(v)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            inner: self.inner.add(&other.inner),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            inner: self.inner.sub(&other.inner),
        }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            inner: self.inner.scale(s),
        }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.inner.max_abs_diff(&other.inner)
    }
}

/// Orthonormal eigenbasis plus ascending eigenvalues of a [`SymMatrix`].
///
/// Column `i` of `vectors` is the eigenvector for `values[i]`.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|r| self.vectors.get(r, i)).collect()
    }

    /// `V f(Lambda) V^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.dim();
        let scaled = Matrix::from_fn(d, |i, j| self.vectors.get(i, j) * f(self.values[j]));
        SymMatrix::symmetrize(&scaled.mul(&self.vectors.transpose()))
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.apply(|x| x)
    }

    /// Orthogonal projection onto the span of eigenvectors whose eigenvalue
    /// satisfies `pred`.
    pub fn projection_where(&self, pred: impl Fn(f64) -> bool) -> SymMatrix {
        self.apply(|x| if pred(x) { 1.0 } else { 0.0 })
    }
}

fn off_diagonal_mass(m: &Matrix) -> f64 {
    let d = m.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            let v = m.get(i, j);
            s += v * v;
        }
    }
    (2.0 * s).sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order with a deterministically
/// sign-normalized orthonormal basis (the largest-magnitude component of each
/// eigenvector is positive).
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomp> {
    let d = a.dim();
    let mut m = a.as_matrix().clone();
    let mut v = Matrix::identity(d);

    if d > 1 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_mass(&m) <= JACOBI_OFF_TOL {
                converged = true;
                break;
            }
            for p in 0..d - 1 {
                for q in (p + 1)..d {
                    let apq = m.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // A <- J^T A J on rows/columns p and q.
                    for r in 0..d {
                        let mrp = m.get(r, p);
                        let mrq = m.get(r, q);
                        m.set(r, p, c * mrp - s * mrq);
                        m.set(r, q, s * mrp + c * mrq);
                    }
                    for r in 0..d {
                        let mpr = m.get(p, r);
                        let mqr = m.get(q, r);
                        m.set(p, r, c * mpr - s * mqr);
                        m.set(q, r, s * mpr + c * mqr);
                    }
                    // Accumulate V <- V J.
                    for r in 0..d {
                        let vrp = v.get(r, p);
                        let vrq = v.get(r, q);
                        v.set(r, p, c * vrp - s * vrq);
                        v.set(r, q, s * vrp + c * vrq);
                    }
                }
            }
        }
        if !converged && off_diagonal_mass(&m) > JACOBI_OFF_TOL {
            return Err(Error::Numerical(format!(
                "jacobi eigensolver did not reach off-diagonal mass {JACOBI_OFF_TOL:e} \
                 within {JACOBI_MAX_SWEEPS} sweeps (dim {d})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        m.get(i, i)
            .partial_cmp(&m.get(j, j))
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });

    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zero(d);
    for (new_col, &old_col) in order.iter().enumerate() {
        // Sign convention: largest-magnitude component positive.
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for r in 0..d {
            let x = v.get(r, old_col).abs();
            if x > best_abs {
                best_abs = x;
                best = r;
            }
        }
        let sign = if v.get(best, old_col) < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            vectors.set(r, new_col, sign * v.get(r, old_col));
        }
    }

    Ok(EigDecomp { values, vectors })
}

/// Smallest eigenvalue; the witness value for all PSD verdicts.
pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(a)?.values[0])
}

pub fn max_eigenvalue(a: &SymMatrix) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(*eig.values.last().expect("dim >= 1"))
}

/// True iff the smallest eigenvalue is `>= -tol`.
pub fn is_psd(a: &SymMatrix, tol: f64) -> Result<bool> {
    assert!(tol >= 0.0, "tolerance must be nonnegative");
    Ok(min_eigenvalue(a)? >= -tol)
}

/// Loewner comparison `A <= B`, i.e. `B - A` is PSD within `tol`.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(loewner_witness(a, b)? >= -tol)
}

/// The witness eigenvalue for `A <= B`: the smallest eigenvalue of `B - A`.
pub fn loewner_witness(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "loewner comparison of dim {} against dim {}",
            a.dim(),
            b.dim()
        )));
    }
    min_eigenvalue(&b.sub(a))
}

fn check_contraction_spectrum(values: &[f64], what: &str) -> Result<()> {
    let lo = values.first().copied().unwrap_or(0.0);
    let hi = values.last().copied().unwrap_or(0.0);
    if lo < -SPECTRUM_EXCURSION_TOL || hi > 1.0 + SPECTRUM_EXCURSION_TOL {
        return Err(Error::Domain(format!(
            "{what}: spectrum [{lo}, {hi}] leaves [0, 1] by more than {SPECTRUM_EXCURSION_TOL:e}"
        )));
    }
    Ok(())
}

/// Spectral functional calculus `f(A) = Q f(Lambda) Q^T` for a scalar `f` on
/// [0, 1]. Eigenvalues are clamped to [0, 1] first; excursions beyond
/// 1e-8 are an error, not a silent clamp.
///
/// Eigenvalues within machine roundoff of 1 are snapped to exactly 1 before
/// `f` is applied: the functions of interest here have unbounded slope at 1
/// (e.g. `1 - (1-t)^{1/k}`), which would otherwise turn eigensolver noise on
/// an exact unit eigenvalue into errors of order `noise^{1/k}`.
pub fn apply_spectral_fn(a: &SymMatrix, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    check_contraction_spectrum(&eig.values, "apply_spectral_fn")?;
    let snap = 4.0 * a.dim() as f64 * f64::EPSILON;
    Ok(eig.apply(|x| {
        let t = x.clamp(0.0, 1.0);
        f(if t >= 1.0 - snap { 1.0 } else { t })
    }))
}

/// Orthogonal projection onto the span of eigenvectors with eigenvalue
/// `>= 1 - cluster_tol`.
pub fn spectral_projection_top(a: &SymMatrix, cluster_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    check_contraction_spectrum(&eig.values, "spectral_projection_top")?;
    Ok(eig.projection_where(|x| x >= 1.0 - cluster_tol))
}

/// Largest singular value, via the top eigenvalue of `A^T A`.
pub fn operator_norm(a: &Matrix) -> f64 {
    let gram = SymMatrix::symmetrize(&a.transpose().mul(a));
    let top = max_eigenvalue(&gram).expect("jacobi converges on gram matrices");
    top.max(0.0).sqrt()
}

/// The contraction `x` with `x T^{1/2} = S^{1/2}` and `x = 0` on
/// `ker(T^{1/2})`, for `0 <= S <= T <= I`.
///
/// Realized as `S^{1/2} pinv(T^{1/2})` where the pseudo-inverse drops
/// eigenvalues of `T^{1/2}` below [`RANK_CUTOFF`] times the largest one.
pub fn contraction_from_pair(s: &SymMatrix, t: &SymMatrix) -> Result<Matrix> {
    if s.dim() != t.dim() {
        return Err(Error::Shape(format!(
            "contraction_from_pair: dim {} vs {}",
            s.dim(),
            t.dim()
        )));
    }
    let tol = SPECTRUM_EXCURSION_TOL;
    let w_s = min_eigenvalue(s)?;
    if w_s < -tol {
        return Err(Error::Order(format!(
            "contraction_from_pair: S not PSD (witness eigenvalue {w_s:e})"
        )));
    }
    let w_st = loewner_witness(s, t)?;
    if w_st < -tol {
        return Err(Error::Order(format!(
            "contraction_from_pair: S <= T fails (witness eigenvalue {w_st:e})"
        )));
    }
    let w_ti = loewner_witness(t, &SymMatrix::identity(t.dim()))?;
    if w_ti < -tol {
        return Err(Error::Order(format!(
            "contraction_from_pair: T <= I fails (witness eigenvalue {w_ti:e})"
        )));
    }

    let s_eig = sym_eig(s)?;
    let s_half = s_eig.apply(|x| x.max(0.0).sqrt());

    let t_eig = sym_eig(t)?;
    let top_root = t_eig
        .values
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .fold(0.0f64, f64::max);
    let noise_floor = (t.dim() as f64 * f64::EPSILON).sqrt() * top_root;
    let cutoff = (RANK_CUTOFF * top_root).max(noise_floor);
    let t_half_pinv = t_eig.apply(|x| {
        let r = x.max(0.0).sqrt();
        if r > cutoff && r > 0.0 {
            1.0 / r
        } else {
            0.0
        }
    });

    let x = s_half.as_matrix().mul(t_half_pinv.as_matrix());
    clip_to_contraction(x)
}

/// Clips singular values above 1, leaving contractions untouched. Inputs
/// with spectrum near the pseudo-inverse cutoff can overshoot the unit ball
/// through amplified roundoff; the true factor never does.
fn clip_to_contraction(x: Matrix) -> Result<Matrix> {
    let gram = sym_eig(&SymMatrix::symmetrize(&x.transpose().mul(&x)))?;
    let top = gram.values.last().copied().unwrap_or(0.0);
    if top <= 1.0 + 1e-12 {
        return Ok(x);
    }
    // x V diag(min(1, 1/sigma)) V^T rescales exactly the overshooting
    // right-singular directions; no small divisors are involved.
    let correction = gram.apply(|lambda| {
        let sigma = lambda.max(0.0).sqrt();
        if sigma > 1.0 {
            1.0 / sigma
        } else {
            1.0
        }
    });
    Ok(x.mul(correction.as_matrix()))
}
