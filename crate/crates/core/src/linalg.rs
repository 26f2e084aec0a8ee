//! Small dense linear-algebra helpers shared by the estimator and analysis code.

use nalgebra::{DMatrix, DVector};

/// Pivots (or eigenvalues) below this fraction of the largest one count as zero.
pub const RANK_RTOL: f64 = 1e-9;

/// Orthonormal basis of the span of `columns` (each of length `dim`) as a
/// `dim x rank` matrix, from a column-pivoted QR factorization.
///
/// The rank counts diagonal entries of `R` above `RANK_RTOL` times the largest.
pub fn orthonormal_span(columns: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    if columns.is_empty() || dim == 0 {
        return DMatrix::zeros(dim, 0);
    }
    let qr = DMatrix::from_columns(columns).col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return DMatrix::zeros(dim, 0);
    }
    let rank = diag.iter().filter(|&&x| x > RANK_RTOL * top).count();
    qr.q().columns(0, rank).into_owned()
}

/// Numerical rank with the same relative threshold as [`orthonormal_span`].
pub fn numerical_rank(columns: &[DVector<f64>], dim: usize) -> usize {
    orthonormal_span(columns, dim).ncols()
}

/// Minimum-norm least-squares solution of `a x = b` for symmetric `a`,
/// dropping eigenvalues below `rtol` times the largest in magnitude.
pub fn symmetric_pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> DVector<f64> {
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut x = DVector::zeros(b.len());
    if top <= 0.0 {
        return x;
    }
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > rtol * top {
            let q = eig.eigenvectors.column(i);
            x += q * (q.dot(b) / lambda);
        }
    }
    x
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(p) - log(1 - p)`, evaluated term by term.
pub fn logit(p: f64) -> f64 {
    p.ln() - (1.0 - p).ln()
}

/// KL divergence between Bernoulli(p) and Bernoulli(q).
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}
