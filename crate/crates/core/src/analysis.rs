//! Instance hardness, worst-case coefficients, the pseudo-divergence between
//! instances and the alternative instance used for lower bounds.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::estimator::{Target, WeightModel};
use crate::instance::Instance;
use crate::linalg::{bernoulli_kl, dot, sigmoid};

/// Factor by which the hardest ratio must dominate every other ratio.
pub const Q_FACTOR: f64 = 4.0;

/// Coefficients of one suboptimal state-action pair, measured against the
/// best action of its state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCoefficients {
    pub state: usize,
    pub action: usize,
    pub gap: f64,
    /// `sum w^2 / N`.
    pub gamma: f64,
    /// `sum |w| / sqrt(N)`.
    pub gamma_tilde: f64,
    /// `sum (w / N)^2`.
    pub gamma_dp: f64,
    /// `sum |w| / N`.
    pub gamma_tilde_dp: f64,
}

impl PairCoefficients {
    pub fn ratio(&self) -> f64 {
        self.gamma / (self.gap * self.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessReport {
    pub best_actions: Vec<usize>,
    pub gaps: Vec<Vec<f64>>,
    pub pairs: Vec<PairCoefficients>,
    #[serde(rename = "H")]
    pub h: f64,
    /// `(state, action)` attaining `H`.
    pub argmax: (usize, usize),
    #[serde(rename = "H_DP", default, skip_serializing_if = "Option::is_none")]
    pub h_dp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyParams>,
    pub q_member: bool,
}

impl HardnessReport {
    pub fn pair(&self, state: usize, action: usize) -> Option<&PairCoefficients> {
        self.pairs.iter().find(|p| p.state == state && p.action == action)
    }
}

pub(crate) fn consistent_model(v: &Instance) -> Result<WeightModel> {
    let c = v.check_consistency();
    if !c.consistent {
        return Err(match c.witness {
            Some((state, first, second)) => Error::Inconsistent { state, first, second },
            None => Error::Numerical("consistency check is ambiguous at the rank tolerance".into()),
        });
    }
    WeightModel::new(v.features(), v.schedule())
}

/// `H(v) = max gamma / gap^2` over suboptimal pairs, with the worst-case and
/// private coefficients alongside.
pub fn hardness(v: &Instance, privacy: Option<PrivacyParams>) -> Result<HardnessReport> {
    if let Some(p) = privacy {
        p.validate()?;
    }
    let model = consistent_model(v)?;
    let best = v.best_actions();
    let gaps = v.suboptimality_gaps();
    let mut pairs = Vec::new();
    for (k, &star) in best.iter().enumerate() {
        for i in (0..v.num_actions()).filter(|&i| i != star) {
            let w = model.weights(Target::new(k, i, star))?;
            let (mut gt, mut gdp, mut gtdp) = (0.0, 0.0, 0.0);
            for (p, &x) in model.pairs().iter().zip(&w.values) {
                gt += x.abs() / p.proportion.sqrt();
                gdp += (x / p.proportion).powi(2);
                gtdp += x.abs() / p.proportion;
            }
            pairs.push(PairCoefficients {
                state: k,
                action: i,
                gap: gaps[k][i],
                gamma: w.gamma,
                gamma_tilde: gt,
                gamma_dp: gdp,
                gamma_tilde_dp: gtdp,
            });
        }
    }
    let (mut h, mut argmax) = (0.0, (0, 0));
    for p in &pairs {
        if p.ratio() > h {
            h = p.ratio();
            argmax = (p.state, p.action);
        }
    }
    let h_dp = privacy.map(|pr| {
        pairs
            .iter()
            .map(|p| (pr.log_term() * p.gamma_dp).sqrt() / (pr.epsilon.sqrt() * p.gap))
            .fold(0.0, f64::max)
    });
    let mut report = HardnessReport {
        best_actions: best,
        gaps,
        pairs,
        h,
        argmax,
        h_dp,
        privacy,
        q_member: false,
    };
    report.q_member = q_membership(&report);
    Ok(report)
}

/// Whether the hardest ratio is at least four times every other one.
/// Vacuously true when there is a single suboptimal pair.
pub fn q_membership(report: &HardnessReport) -> bool {
    let (kb, ib) = report.argmax;
    report
        .pairs
        .iter()
        .filter(|p| (p.state, p.action) != (kb, ib))
        .all(|p| report.h >= Q_FACTOR * p.ratio())
}

fn same_structure(v: &Instance, w: &Instance) -> Result<()> {
    if v.features() != w.features() || v.schedule() != w.schedule() || v.rho() != w.rho() {
        return Err(Error::Shape("instances differ in more than theta".into()));
    }
    Ok(())
}

/// `sum N (<phi_i - phi_j, theta - theta'>)^2` over observed pairs.
pub fn d_tilde(v: &Instance, alt: &Instance) -> Result<f64> {
    same_structure(v, alt)?;
    let diff: Vec<f64> = v.theta().iter().zip(alt.theta()).map(|(a, b)| a - b).collect();
    let f = v.features();
    Ok(v.schedule()
        .observed()
        .map(|p| {
            let x = dot(f.get(p.state, p.first), &diff) - dot(f.get(p.state, p.second), &diff);
            p.proportion * x * x
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlBracket {
    /// KL divergence between the label distributions of `n` samples.
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
    pub dtilde: f64,
    pub r_max: f64,
}

impl KlBracket {
    pub fn holds(&self) -> bool {
        self.lower <= self.exact && self.exact <= self.upper
    }
}

/// Exact label KL divergence with the bracket `[2n e^{-4R} D, 2n e^{2R} D]`,
/// `R` the largest absolute reward under either instance.
pub fn kl_bracket(v: &Instance, alt: &Instance, n: usize) -> Result<KlBracket> {
    let dtilde = d_tilde(v, alt)?;
    let (r, ra) = (v.rewards(), alt.rewards());
    let r_max = r.iter().chain(&ra).flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let nf = n as f64;
    let exact = nf * v
        .schedule()
        .observed()
        .map(|p| {
            let (k, i, j) = (p.state, p.first, p.second);
            p.proportion * bernoulli_kl(sigmoid(r[k][i] - r[k][j]), sigmoid(ra[k][i] - ra[k][j]))
        })
        .sum::<f64>();
    Ok(KlBracket {
        exact,
        lower: 2.0 * nf * (-4.0 * r_max).exp() * dtilde,
        upper: 2.0 * nf * (2.0 * r_max).exp() * dtilde,
        dtilde,
        r_max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryPair {
    pub base: Instance,
    pub alt: Instance,
    pub dtilde_value: f64,
    pub eta: f64,
    pub z: Vec<f64>,
    /// `||[z]_G||^2` in the `V^{-1}` norm.
    pub z_norm_sq: f64,
}

/// Smallest-divergence instance among those with `<z, theta' - theta> = eta`:
/// `theta' = theta + eta / ||z||^2_{V^{-1}} * G V^{-1} [z]_G`.
pub fn alt_minimizer(v: &Instance, z: &[f64], eta: f64) -> Result<AdversaryPair> {
    let model = WeightModel::new(v.features(), v.schedule())?;
    alt_minimizer_with(v, &model, z, eta)
}

fn alt_minimizer_with(v: &Instance, model: &WeightModel, z: &[f64], eta: f64) -> Result<AdversaryPair> {
    if z.len() != v.dim() {
        return Err(Error::Shape(format!("z has length {}, expected {}", z.len(), v.dim())));
    }
    let zv = DVector::from_column_slice(z);
    let coords = model
        .span_coords(&zv)
        .ok_or_else(|| Error::InvalidArgument("z lies outside the span of observed differences".into()))?;
    let y = model.solve(&coords);
    let z_norm_sq = coords.dot(&y);
    if !(z_norm_sq > 0.0) {
        return Err(Error::InvalidArgument("z must be nonzero".into()));
    }
    let step = model.basis().lift(&y) * (eta / z_norm_sq);
    let theta: Vec<f64> = v.theta().iter().zip(step.iter()).map(|(t, s)| t + s).collect();
    let r_max = v
        .features()
        .to_nested()
        .iter()
        .flatten()
        .fold(0.0f64, |m, phi| m.max(dot(phi, &theta).abs()));
    let alt = v.with_theta(theta, v.reward_bound().max(r_max))?;

    let shift: Vec<f64> = alt.theta().iter().zip(v.theta()).map(|(a, b)| a - b).collect();
    let residual = (dot(z, &shift) - eta).abs();
    if residual > 1e-9 * eta.abs().max(1.0) {
        return Err(Error::CheckFailed(format!("alternative misses the constraint by {residual:e}")));
    }
    let dtilde_value = d_tilde(v, &alt)?;
    let expected = eta * eta / z_norm_sq;
    if (dtilde_value - expected).abs() > 1e-8 * expected.max(1.0) {
        return Err(Error::CheckFailed(format!(
            "divergence {dtilde_value} differs from closed form {expected}"
        )));
    }
    Ok(AdversaryPair {
        base: v.clone(),
        alt,
        dtilde_value,
        eta,
        z: z.to_vec(),
        z_norm_sq,
    })
}

/// Properties of the lower-bound adversary, measured rather than assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryChecks {
    pub state: usize,
    pub action: usize,
    /// `r'(action) - r'(best)` in the flipped state, equal to the original gap.
    pub flipped_margin: f64,
    pub other_states_unchanged: bool,
    pub action_becomes_optimal: bool,
    pub q_member: bool,
    pub h: f64,
    pub h_alt: f64,
}

impl AdversaryChecks {
    pub fn hardness_within_factor_eight(&self) -> bool {
        let tol = 1e-9 * self.h.max(1.0);
        self.h <= self.h_alt + tol && self.h_alt <= 8.0 * self.h + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adversary {
    pub pair: AdversaryPair,
    pub checks: AdversaryChecks,
}

/// Alternative instance in which the hardest suboptimal action overtakes
/// the best one: `z = phi(k, i) - phi(k, i*)`, `eta = 2 gap`.
///
/// The gap identity always holds. For instances in `Q` the flip is also
/// confined to state `k`, `i` becomes optimal there, and
/// `H(v) <= H(v') <= 8 H(v)`; violations of those are errors.
pub fn lower_bound_adversary(v: &Instance) -> Result<Adversary> {
    let report = hardness(v, None)?;
    if report.pairs.is_empty() {
        return Err(Error::InvalidArgument("instance has no suboptimal action".into()));
    }
    let (k, i) = report.argmax;
    let star = report.best_actions[k];
    let gap = report.gaps[k][i];
    let f = v.features();
    let z: Vec<f64> = f.get(k, i).iter().zip(f.get(k, star)).map(|(a, b)| a - b).collect();
    let model = consistent_model(v)?;
    let pair = alt_minimizer_with(v, &model, &z, 2.0 * gap)?;

    let r_alt = pair.alt.rewards();
    let flipped_margin = r_alt[k][i] - r_alt[k][star];
    if (flipped_margin - gap).abs() > 1e-8 * gap.max(1.0) {
        return Err(Error::CheckFailed(format!(
            "flipped margin {flipped_margin} differs from the gap {gap}"
        )));
    }
    let best_alt = pair.alt.best_actions();
    let other_states_unchanged = (0..v.num_states()).filter(|&s| s != k).all(|s| best_alt[s] == report.best_actions[s]);
    let action_becomes_optimal = best_alt[k] == i;
    let h_alt = hardness(&pair.alt, None)?.h;
    let checks = AdversaryChecks {
        state: k,
        action: i,
        flipped_margin,
        other_states_unchanged,
        action_becomes_optimal,
        q_member: report.q_member,
        h: report.h,
        h_alt,
    };
    if checks.q_member {
        if !(other_states_unchanged && action_becomes_optimal) {
            return Err(Error::CheckFailed(format!(
                "alternative does not flip exactly state {k} to action {i}"
            )));
        }
        if !checks.hardness_within_factor_eight() {
            return Err(Error::CheckFailed(format!(
                "alternative hardness {h_alt} outside [H, 8H] with H = {}",
                report.h
            )));
        }
    }
    Ok(Adversary { pair, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub n: usize,
    /// `sum rho_k (sqrt(gamma) + gamma_tilde) / sqrt(n)`.
    pub static_envelope: f64,
    /// `sum rho_k (sqrt(gamma_dp) + gamma_tilde_dp) sqrt(ln(1.25/delta)) / (epsilon n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_term: Option<f64>,
}

impl EnvelopeRow {
    pub fn total(&self) -> f64 {
        self.static_envelope + self.dp_term.unwrap_or(0.0)
    }
}

/// Worst-case regret envelopes with unit constants.
pub fn regret_envelopes(v: &Instance, n_grid: &[usize], privacy: Option<PrivacyParams>) -> Result<Vec<EnvelopeRow>> {
    let report = hardness(v, privacy)?;
    let rho = v.rho();
    let stat: f64 = report
        .pairs
        .iter()
        .map(|p| rho[p.state] * (p.gamma.sqrt() + p.gamma_tilde))
        .sum();
    let dp: f64 = report
        .pairs
        .iter()
        .map(|p| rho[p.state] * (p.gamma_dp.sqrt() + p.gamma_tilde_dp))
        .sum();
    n_grid
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::InvalidArgument("n must be positive".into()));
            }
            let nf = n as f64;
            Ok(EnvelopeRow {
                n,
                static_envelope: stat / nf.sqrt(),
                dp_term: privacy.map(|p| dp * p.log_term().sqrt() / (p.epsilon * nf)),
            })
        })
        .collect()
}
