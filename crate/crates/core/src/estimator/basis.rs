use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::{Features, Schedule};
use crate::linalg::orthonormal_span;

/// Absolute part of the span-membership tolerance.
pub const SPAN_TOL: f64 = 1e-9;

/// Orthonormal basis of the span of observed feature differences.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanBasis {
    /// `d x r`, one basis vector per column.
    matrix: DMatrix<f64>,
}

impl SpanBasis {
    /// Wraps a matrix whose columns must already be orthonormal.
    pub fn from_orthonormal(matrix: DMatrix<f64>) -> Result<Self> {
        let r = matrix.ncols();
        let gram = matrix.transpose() * &matrix;
        let err = (gram - DMatrix::<f64>::identity(r, r)).amax();
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Coordinates `[x]_G` of `x` in this basis.
    pub fn coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(x)
    }

    /// Maps coordinates back to the ambient space.
    pub fn lift(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.matrix * coords
    }

    /// Distance from `x` to the span.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (x - self.lift(&self.coords(x))).norm()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.residual(x) <= SPAN_TOL * (1.0 + x.norm())
    }
}

/// Orthonormal basis of `Span{phi(k,i) - phi(k,j) : N[k][i][j] > 0}`, with
/// dimension equal to the numerical rank of the observed differences.
pub fn span_basis(features: &Features, schedule: &Schedule) -> Result<SpanBasis> {
    let diffs: Vec<DVector<f64>> = schedule
        .observed()
        .map(|p| features.diff(p.state, p.first, p.second))
        .collect();
    if diffs.is_empty() {
        return Err(Error::InvalidSchedule("no observed comparisons".into()));
    }
    let matrix = orthonormal_span(&diffs, features.dim());
    if matrix.ncols() == 0 {
        return Err(Error::Numerical("observed differences are all zero".into()));
    }
    Ok(SpanBasis { matrix })
}

/// `V = sum N[k][i][j] [phi(k,i) - phi(k,j)]_G [phi(k,i) - phi(k,j)]_G^T`.
///
/// Fails if an observed difference escapes the basis or if the smallest
/// eigenvalue of `V` is at most `1e-12 * trace(V)`.
pub fn build_design_matrix(schedule: &Schedule, features: &Features, basis: &SpanBasis) -> Result<DMatrix<f64>> {
    if basis.dim() != features.dim() {
        return Err(Error::Shape(format!(
            "basis lives in R^{}, features in R^{}",
            basis.dim(),
            features.dim()
        )));
    }
    let r = basis.rank();
    let mut v = DMatrix::<f64>::zeros(r, r);
    for p in schedule.observed() {
        let diff = features.diff(p.state, p.first, p.second);
        if !basis.contains(&diff) {
            return Err(Error::Numerical(format!(
                "observed difference ({},{},{}) is not spanned by the basis",
                p.state, p.first, p.second
            )));
        }
        let c = basis.coords(&diff);
        v.ger(p.proportion, &c, &c, 1.0);
    }
    check_positive_definite(&v)?;
    Ok(v)
}

pub(crate) fn check_positive_definite(v: &DMatrix<f64>) -> Result<()> {
    if v.nrows() == 0 {
        return Err(Error::Numerical("design matrix is empty".into()));
    }
    let trace = v.trace();
    let min_eig = v
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > 1e-12 * trace) {
        return Err(Error::Numerical(format!(
            "design matrix is singular: smallest eigenvalue {min_eig:e}, trace {trace:e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{t1, t2};

    #[test]
    fn t1_basis_and_design() {
        let v = t1();
        let b = span_basis(v.features(), v.schedule()).unwrap();
        assert_eq!(b.rank(), 1);
        assert!((b.matrix()[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let m = build_design_matrix(v.schedule(), v.features(), &b).unwrap();
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t2_design_pools_states() {
        let v = t2();
        let b = span_basis(v.features(), v.schedule()).unwrap();
        let m = build_design_matrix(v.schedule(), v.features(), &b).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_independent_directions() {
        let f = Features::new(1, 3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = Schedule::from_entries(1, 3, &[(0, 0, 1, 0.5), (0, 1, 2, 0.5)]).unwrap();
        assert_eq!(span_basis(&f, &s).unwrap().rank(), 2);
    }

    #[test]
    fn design_scales_linearly() {
        let f = Features::new(1, 3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.3, 1.0]).unwrap();
        let s = Schedule::from_entries(1, 3, &[(0, 0, 1, 0.3), (0, 1, 2, 0.7)]).unwrap();
        let b = span_basis(&f, &s).unwrap();
        let v1 = build_design_matrix(&s, &f, &b).unwrap();
        let v2 = build_design_matrix(&s.scaled(0.25), &f, &b).unwrap();
        assert!((v1 * 0.25 - v2).amax() < 1e-15);
    }

    #[test]
    fn empty_schedule_rejected() {
        let v = t1();
        assert!(span_basis(v.features(), &Schedule::zeros(1, 2)).is_err());
    }

    #[test]
    fn rank_deficient_basis_detected() {
        let f = Features::new(1, 3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = Schedule::from_entries(1, 3, &[(0, 0, 1, 0.5), (0, 1, 2, 0.5)]).unwrap();
        let narrow = SpanBasis::from_orthonormal(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(matches!(build_design_matrix(&s, &f, &narrow), Err(Error::Numerical(_))));
        assert!(SpanBasis::from_orthonormal(DMatrix::from_column_slice(2, 1, &[1.0, 1.0])).is_err());
    }
}
