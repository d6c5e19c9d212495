//! Proximal operators, projections and the small amount of dense linear
//! algebra the solvers share.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Every entry point that accepts
//! user data checks finiteness first; the solvers assume finite iterates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

const SVD_MAX_ITERS: usize = 10_000;

/// Relative cutoff used for rank decisions and for discarding numerically
/// zero singular directions.
pub const RANK_TOL: f64 = 1e-10;

pub fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return invalid(format!("{what} has a non-finite entry at ({r}, {c})"));
    }
    Ok(())
}

/// Soft threshold `max(x - rho, 0) + min(x + rho, 0)`.
pub fn scalar_shrink(x: f64, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return invalid(format!("shrinkage threshold must be >= 0, got {rho}"));
    }
    Ok(shrink(x, rho))
}

#[inline]
fn shrink(x: f64, rho: f64) -> f64 {
    (x - rho).max(0.0) + (x + rho).min(0.0)
}

/// Elementwise soft threshold.
pub fn shrink_elementwise(m: &DMatrix<f64>, rho: f64) -> Result<DMatrix<f64>> {
    if !(rho >= 0.0) {
        return invalid(format!("shrinkage threshold must be >= 0, got {rho}"));
    }
    Ok(m.map(|v| shrink(v, rho)))
}

/// How [`svt_with`] factors its argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvtBackend {
    /// Thin SVD of the matrix itself.
    Exact,
    /// Symmetric eigendecomposition of the smaller Gram matrix. Costs
    /// `O(r^2 c)` for an `r x c` matrix with `r <= c`.
    Gram,
    /// `Gram` when one side is at least four times the other, else `Exact`.
    Auto,
}

/// Singular value thresholding: `U S_tau(Sigma) V^T`, the proximal operator
/// of `tau * ||.||_*`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    svt_with(m, tau, SvtBackend::Exact)
}

pub fn svt_with(m: &DMatrix<f64>, tau: f64, backend: SvtBackend) -> Result<DMatrix<f64>> {
    Ok(svt_nuclear(m, tau, backend)?.0)
}

/// [`svt_with`] plus the nuclear norm of the result, which is the sum of
/// the thresholded singular values.
pub fn svt_nuclear(m: &DMatrix<f64>, tau: f64, backend: SvtBackend) -> Result<(DMatrix<f64>, f64)> {
    if !(tau >= 0.0) {
        return invalid(format!("svt threshold must be >= 0, got {tau}"));
    }
    ensure_finite(m, "svt input")?;
    if m.is_empty() {
        return Ok((m.clone(), 0.0));
    }
    let backend = match backend {
        SvtBackend::Auto => {
            let (small, large) = (m.nrows().min(m.ncols()), m.nrows().max(m.ncols()));
            if large >= 4 * small {
                SvtBackend::Gram
            } else {
                SvtBackend::Exact
            }
        }
        b => b,
    };
    match backend {
        SvtBackend::Gram => Ok(svt_gram(m, tau)),
        _ => svt_exact(m, tau),
    }
}

fn svt_exact(m: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| {
            Error::NumericFailure(format!(
                "SVD of a {}x{} matrix did not converge within {SVD_MAX_ITERS} iterations",
                m.nrows(),
                m.ncols()
            ))
        })?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let mut nuclear = 0.0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = shrink(s, tau);
        if shrunk > 0.0 {
            out += (u.column(i) * shrunk) * v_t.row(i);
            nuclear += shrunk;
        }
    }
    Ok((out, nuclear))
}

// Q = M - U diag(min(1, tau / s)) U^T M with U the left singular vectors
// from the Gram eigenproblem. Directions with s <= tau are removed whole,
// so tiny singular values never get divided by.
fn svt_gram(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, f64) {
    if m.nrows() > m.ncols() {
        let (q, nuclear) = svt_gram(&m.transpose(), tau);
        return (q.transpose(), nuclear);
    }
    let gram = m * m.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut scale = DVector::zeros(m.nrows());
    let mut nuclear = 0.0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        scale[i] = if s <= tau { 1.0 } else { tau / s };
        nuclear += (s - tau).max(0.0);
    }
    let u = &eig.eigenvectors;
    let proj = u.transpose() * m;
    let mut scaled_u = u.clone();
    for (j, mut col) in scaled_u.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    (m - scaled_u * proj, nuclear)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| {
            Error::NumericFailure(format!(
                "singular values of a {}x{} matrix did not converge",
                m.nrows(),
                m.ncols()
            ))
        })?;
    let mut s = svd.singular_values;
    s.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.sum())
}

/// Largest singular value, from the smaller Gram matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
        .sqrt()
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > rel_tol * top).count())
}

/// Proximal operator of `kappa * ||.||_{2,1}`: each column is scaled by
/// `max(0, 1 - kappa / ||c||)`.
pub fn col_l21_prox(c: &DMatrix<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    if !(kappa >= 0.0) {
        return invalid(format!("l2,1 threshold must be >= 0, got {kappa}"));
    }
    let mut out = c.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        let factor = if norm > kappa { 1.0 - kappa / norm } else { 0.0 };
        col *= factor;
    }
    Ok(out)
}

/// Sum of column Euclidean norms.
pub fn l21_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

pub fn project_nonneg(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return invalid("cannot project an empty vector onto the simplex");
    }
    if v.iter().any(|x| !x.is_finite()) {
        return invalid("simplex projection input must be finite");
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// Applies [`project_simplex`] to every column.
pub fn project_columns_simplex(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let p = project_simplex(col.as_slice())?;
        col.copy_from_slice(&p);
    }
    Ok(out)
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
