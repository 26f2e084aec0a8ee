//! The locally-optimal-weights estimator.

mod basis;
mod estimate;
mod oracle;
mod rates;
mod weights;

pub use basis::{build_design_matrix, span_basis, SpanBasis, SPAN_TOL};
pub use estimate::{
    estimate_relative_rewards, pair_log_odds, prepare, relative_reward, rl_low, rl_low_with_model,
    select_best_actions, tie_set, EstimateReport, Selection, REFERENCE_ACTION, TIE_TOL,
};
pub(crate) use estimate::report_from_log_odds;
pub use oracle::local_weights_qp_oracle;
pub use rates::{clip_rate, success_rates, SuccessRates};
pub use weights::{local_weights, variance_proxy, LocalWeights, Target, WeightModel, WeightTable};
