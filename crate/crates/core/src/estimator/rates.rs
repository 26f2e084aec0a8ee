use crate::error::{Error, Result};
use crate::instance::{PreferenceDataset, Schedule};
use crate::linalg::{logit, sigmoid};

/// Clips a success rate into `[sigmoid(-2L), sigmoid(2L)]`, the range any
/// pairwise win probability can take when rewards are bounded by `L`.
pub fn clip_rate(b: f64, bound: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::InvalidArgument(format!("success rate {b} outside [0,1]")));
    }
    if !(bound >= 0.0) {
        return Err(Error::InvalidArgument(format!("clip bound {bound} must be nonnegative")));
    }
    let upper = sigmoid(2.0 * bound);
    let lower = sigmoid(-2.0 * bound);
    Ok(if b > upper {
        upper
    } else if b < lower {
        lower
    } else {
        b
    })
}

/// Empirical success rates `B[k][i][j]` and their clipped versions.
///
/// Both orientations are stored: `B[k][j][i] = 1 - B[k][i][j]` on observed
/// slots, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRates {
    num_states: usize,
    num_actions: usize,
    raw: Vec<f64>,
    clipped: Vec<f64>,
    observed: Vec<bool>,
    counts: Vec<usize>,
    clip_bound: f64,
}

impl SuccessRates {
    fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.num_actions + i) * self.num_actions + j
    }

    /// Builds rates from per-slot win fractions of the first action, oriented `i < j`.
    pub(crate) fn from_fractions(
        schedule: &Schedule,
        fractions: &[(usize, usize, usize, f64, usize)],
        clip_bound: f64,
    ) -> Result<Self> {
        let (s, a) = (schedule.num_states(), schedule.num_actions());
        let mut out = Self {
            num_states: s,
            num_actions: a,
            raw: vec![0.0; s * a * a],
            clipped: vec![0.0; s * a * a],
            observed: vec![false; s * a * a],
            counts: vec![0; s * a * a],
            clip_bound,
        };
        for &(k, i, j, b, count) in fractions {
            let c = clip_rate(b.clamp(0.0, 1.0), clip_bound)?;
            let fwd = out.index(k, i, j);
            let rev = out.index(k, j, i);
            out.raw[fwd] = b;
            out.raw[rev] = 1.0 - b;
            out.clipped[fwd] = c;
            out.clipped[rev] = clip_rate((1.0 - b).clamp(0.0, 1.0), clip_bound)?;
            out.observed[fwd] = true;
            out.observed[rev] = true;
            out.counts[fwd] = count;
        }
        Ok(out)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Unclipped `B[k][i][j]`.
    pub fn raw(&self, k: usize, i: usize, j: usize) -> f64 {
        self.raw[self.index(k, i, j)]
    }

    pub fn clipped(&self, k: usize, i: usize, j: usize) -> f64 {
        self.clipped[self.index(k, i, j)]
    }

    pub fn is_observed(&self, k: usize, i: usize, j: usize) -> bool {
        self.observed[self.index(k, i, j)]
    }

    /// Number of comparisons behind `B[k][i][j]` for `i < j`.
    pub fn count(&self, k: usize, i: usize, j: usize) -> usize {
        self.counts[self.index(k, i.min(j), i.max(j))]
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    /// `log(B / (1 - B))` of the clipped rate for the slot oriented `i < j`.
    pub fn log_odds(&self, k: usize, i: usize, j: usize) -> Result<f64> {
        let b = self.clipped(k, i, j);
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::Numerical(format!(
                "clipped rate {b} at ({k},{i},{j}) has no finite log-odds"
            )));
        }
        Ok(logit(b))
    }
}

/// Success rates of a dataset, clipped with bound `L`.
///
/// `schedule` must equal the empirical proportions of `data`.
pub fn success_rates(data: &PreferenceDataset, schedule: &Schedule, clip_bound: f64) -> Result<SuccessRates> {
    let (s, a) = (schedule.num_states(), schedule.num_actions());
    let mut counts = vec![0usize; s * a * a];
    let mut wins = vec![0usize; s * a * a];
    for r in data.records() {
        if r.state >= s || r.second >= a {
            return Err(Error::OutOfRange(format!(
                "record ({}, {}, {}) outside schedule dimensions",
                r.state, r.first, r.second
            )));
        }
        let idx = (r.state * a + r.first) * a + r.second;
        counts[idx] += 1;
        wins[idx] += usize::from(r.winner_is_first);
    }
    let n = data.len() as f64;
    let mut fractions = Vec::new();
    for k in 0..s {
        for i in 0..a {
            for j in i + 1..a {
                let idx = (k * a + i) * a + j;
                let expected = schedule.get(k, i, j);
                let actual = if n > 0.0 { counts[idx] as f64 / n } else { 0.0 };
                if (expected - actual).abs() > 1e-12 {
                    return Err(Error::InvalidSchedule(format!(
                        "schedule entry ({k},{i},{j}) = {expected} disagrees with data proportion {actual}"
                    )));
                }
                if counts[idx] > 0 {
                    fractions.push((k, i, j, wins[idx] as f64 / counts[idx] as f64, counts[idx]));
                }
            }
        }
    }
    SuccessRates::from_fractions(schedule, &fractions, clip_bound)
}
