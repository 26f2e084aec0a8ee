use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::basis::{build_design_matrix, check_positive_definite, span_basis, SpanBasis};
use crate::error::{Error, Result};
use crate::instance::{Features, ObservedPair, Schedule};
use crate::par::Execution;

/// A relative-reward target `(state, i, j)` with `i != j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Target {
    pub state: usize,
    pub first: usize,
    pub second: usize,
}

impl Target {
    pub fn new(state: usize, first: usize, second: usize) -> Self {
        Self { state, first, second }
    }
}

/// Locally optimal weights for one target, aligned with the model's observed pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeights {
    pub target: Target,
    pub values: Vec<f64>,
    /// `sum w^2 / N` over observed pairs.
    pub gamma: f64,
}

/// Weight tables for many targets sharing one basis and design matrix.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub pairs: Vec<ObservedPair>,
    pub basis: SpanBasis,
    pub design: DMatrix<f64>,
    pub entries: Vec<LocalWeights>,
}

impl WeightTable {
    pub fn get(&self, target: Target) -> Option<&LocalWeights> {
        self.entries.iter().find(|w| w.target == target)
    }
}

/// Everything about the weights that depends only on features and schedule:
/// the span basis, the design matrix `V`, and its factorization.
#[derive(Debug, Clone)]
pub struct WeightModel {
    features: Features,
    basis: SpanBasis,
    design: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    pairs: Vec<ObservedPair>,
    pair_coords: Vec<DVector<f64>>,
}

impl WeightModel {
    pub fn new(features: &Features, schedule: &Schedule) -> Result<Self> {
        let basis = span_basis(features, schedule)?;
        Self::with_basis(features, schedule, basis)
    }

    /// Uses a caller-supplied orthonormal basis of the observed span.
    pub fn with_basis(features: &Features, schedule: &Schedule, basis: SpanBasis) -> Result<Self> {
        let design = build_design_matrix(schedule, features, &basis)?;
        Self::from_parts(features, schedule, basis, design)
    }

    pub(crate) fn from_parts(
        features: &Features,
        schedule: &Schedule,
        basis: SpanBasis,
        design: DMatrix<f64>,
    ) -> Result<Self> {
        if design.nrows() != basis.rank() || design.ncols() != basis.rank() {
            return Err(Error::Shape("design matrix does not match basis rank".into()));
        }
        check_positive_definite(&design)?;
        let chol = Cholesky::new(design.clone())
            .ok_or_else(|| Error::Numerical("Cholesky factorization of V failed".into()))?;
        let pairs: Vec<ObservedPair> = schedule.observed().collect();
        let pair_coords = pairs
            .iter()
            .map(|p| basis.coords(&features.diff(p.state, p.first, p.second)))
            .collect();
        Ok(Self {
            features: features.clone(),
            basis,
            design,
            chol,
            pairs,
            pair_coords,
        })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn basis(&self) -> &SpanBasis {
        &self.basis
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn pairs(&self) -> &[ObservedPair] {
        &self.pairs
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// `[x]_G` for a vector that must lie in the observed span.
    pub fn span_coords(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.basis.contains(x).then(|| self.basis.coords(x))
    }

    fn check_target(&self, t: Target) -> Result<()> {
        let (s, a) = (self.features.num_states(), self.features.num_actions());
        if t.state >= s || t.first >= a || t.second >= a {
            return Err(Error::OutOfRange(format!(
                "target ({},{},{})",
                t.state, t.first, t.second
            )));
        }
        if t.first == t.second {
            return Err(Error::InvalidArgument("target actions must differ".into()));
        }
        Ok(())
    }

    /// `[phi(k,i) - phi(k,j)]_G`, failing if the difference leaves the span.
    pub fn target_coords(&self, t: Target) -> Result<DVector<f64>> {
        let diff = self.features.diff(t.state, t.first, t.second);
        self.span_coords(&diff).ok_or(Error::Inconsistent {
            state: t.state,
            first: t.first.min(t.second),
            second: t.first.max(t.second),
        })
    }

    /// Locally optimal weights `w_p = N_p [phi_p]_G^T V^{-1} [phi_t]_G`.
    pub fn weights(&self, t: Target) -> Result<LocalWeights> {
        self.check_target(t)?;
        let y = self.solve(&self.target_coords(t)?);
        let values: Vec<f64> = self
            .pairs
            .iter()
            .zip(&self.pair_coords)
            .map(|(p, c)| p.proportion * c.dot(&y))
            .collect();
        let gamma = variance_proxy(&self.pairs, &values);
        Ok(LocalWeights { target: t, values, gamma })
    }

    /// `||[phi(k,i) - phi(k,j)]_G||^2_{V^{-1}}`.
    pub fn gamma_closed_form(&self, t: Target) -> Result<f64> {
        self.check_target(t)?;
        let c = self.target_coords(t)?;
        Ok(c.dot(&self.solve(&c)))
    }

    /// Weights for every ordered target with distinct actions.
    pub fn weight_table(&self, exec: Execution) -> Result<WeightTable> {
        let (s, a) = (self.features.num_states(), self.features.num_actions());
        let targets: Vec<Target> = (0..s)
            .flat_map(|k| (0..a).flat_map(move |i| (0..a).filter(move |&j| j != i).map(move |j| Target::new(k, i, j))))
            .collect();
        let entries = exec
            .map(&targets, |&t| self.weights(t))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightTable {
            pairs: self.pairs.clone(),
            basis: self.basis.clone(),
            design: self.design.clone(),
            entries,
        })
    }

    /// The global vector `V^{-1} sum_p N_p [phi_p]_G lo_p`, where `lo` holds
    /// one log-odds value per observed pair.
    pub fn global_vector(&self, log_odds: &[f64]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.basis.rank());
        for ((p, c), lo) in self.pairs.iter().zip(&self.pair_coords).zip(log_odds) {
            acc.axpy(p.proportion * lo, c, 1.0);
        }
        self.solve(&acc)
    }
}

/// `sum w^2 / N` over observed pairs.
pub fn variance_proxy(pairs: &[ObservedPair], weights: &[f64]) -> f64 {
    pairs
        .iter()
        .zip(weights)
        .map(|(p, w)| w * w / p.proportion)
        .sum()
}

/// Locally optimal weights for one target from an explicit basis and design matrix.
pub fn local_weights(
    target: Target,
    schedule: &Schedule,
    features: &Features,
    basis: &SpanBasis,
    design: &DMatrix<f64>,
) -> Result<LocalWeights> {
    WeightModel::from_parts(features, schedule, basis.clone(), design.clone())?.weights(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{t1, t2};

    #[test]
    fn t1_single_weight() {
        let v = t1();
        let m = WeightModel::new(v.features(), v.schedule()).unwrap();
        let w = m.weights(Target::new(0, 0, 1)).unwrap();
        assert!((w.values[0] - 1.0).abs() < 1e-15);
        assert!((w.gamma - 1.0).abs() < 1e-15);
        let rev = m.weights(Target::new(0, 1, 0)).unwrap();
        assert!((rev.values[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn t2_inverse_variance_pooling() {
        let v = t2();
        let m = WeightModel::new(v.features(), v.schedule()).unwrap();
        let w = m.weights(Target::new(0, 0, 1)).unwrap();
        assert!((w.values[0] - 0.2).abs() < 1e-15);
        assert!((w.values[1] - 0.8).abs() < 1e-15);
        assert!((w.gamma - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chained_pairs_unique_decomposition() {
        let f = Features::new(1, 3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = Schedule::from_entries(1, 3, &[(0, 0, 1, 0.5), (0, 1, 2, 0.5)]).unwrap();
        let m = WeightModel::new(&f, &s).unwrap();
        let w = m.weights(Target::new(0, 0, 2)).unwrap();
        assert!((w.values[0] - 1.0).abs() < 1e-12);
        assert!((w.values[1] - 1.0).abs() < 1e-12);
        assert!((w.gamma - 4.0).abs() < 1e-12);
        assert!((m.gamma_closed_form(Target::new(0, 0, 2)).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn target_outside_span_is_inconsistent() {
        let f = Features::new(1, 3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = Schedule::from_entries(1, 3, &[(0, 0, 1, 1.0)]).unwrap();
        let m = WeightModel::new(&f, &s).unwrap();
        assert!(matches!(
            m.weights(Target::new(0, 2, 0)),
            Err(Error::Inconsistent { state: 0, first: 0, second: 2 })
        ));
        assert!(matches!(m.weights(Target::new(0, 1, 1)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn table_is_antisymmetric() {
        let v = t2();
        let m = WeightModel::new(v.features(), v.schedule()).unwrap();
        let table = m.weight_table(Execution::Serial).unwrap();
        assert_eq!(table.entries.len(), 4);
        let a = table.get(Target::new(1, 0, 1)).unwrap();
        let b = table.get(Target::new(1, 1, 0)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(*x, -*y);
        }
    }
}
