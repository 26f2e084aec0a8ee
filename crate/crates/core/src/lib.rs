//! Offline preference-based estimation with locally optimal weights.
//!
//! Pairwise comparisons follow a linear Bradley-Terry-Luce model. The
//! estimator pools log-odds of empirical success rates with minimum-variance
//! weights, then picks the best action in each state. Private, MDP and
//! maximum-likelihood variants share the same instance and dataset types.

pub mod analysis;
pub mod baseline;
pub mod dp;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod mdp;
pub mod par;
pub mod seed;

pub use error::{Error, Result};
