//! Reference solver for the locally optimal weights.
//!
//! Solves `min sum u_p^2 / N_p` subject to `sum u_p (phi_p) = phi_target`
//! through the full KKT system in ambient coordinates. It shares no code with
//! the basis/design-matrix route and exists to cross-check it.

use nalgebra::{DMatrix, DVector};

use super::weights::Target;
use crate::error::{Error, Result};
use crate::instance::{Features, Schedule};
use crate::linalg::symmetric_pinv_solve;

/// Weights aligned with `schedule.observed()` order.
pub fn local_weights_qp_oracle(target: Target, schedule: &Schedule, features: &Features) -> Result<Vec<f64>> {
    let pairs: Vec<_> = schedule.observed().collect();
    let m = pairs.len();
    let d = features.dim();
    if m == 0 {
        return Err(Error::InvalidSchedule("no observed comparisons".into()));
    }
    let rhs_t = features.diff(target.state, target.first, target.second);
    let size = m + d;
    let mut kkt = DMatrix::<f64>::zeros(size, size);
    for (c, p) in pairs.iter().enumerate() {
        kkt[(c, c)] = 2.0 / p.proportion;
        let diff = features.diff(p.state, p.first, p.second);
        for r in 0..d {
            kkt[(m + r, c)] = diff[r];
            kkt[(c, m + r)] = diff[r];
        }
    }
    let mut rhs = DVector::<f64>::zeros(size);
    for r in 0..d {
        rhs[m + r] = rhs_t[r];
    }
    let sol = symmetric_pinv_solve(&kkt, &rhs, 1e-12);
    let u: Vec<f64> = sol.rows(0, m).iter().copied().collect();
    let mut recon = DVector::<f64>::zeros(d);
    for (p, w) in pairs.iter().zip(&u) {
        recon.axpy(*w, &features.diff(p.state, p.first, p.second), 1.0);
    }
    if (&recon - &rhs_t).norm() > 1e-8 * (1.0 + rhs_t.norm()) {
        return Err(Error::Inconsistent {
            state: target.state,
            first: target.first.min(target.second),
            second: target.first.max(target.second),
        });
    }
    Ok(u)
}
