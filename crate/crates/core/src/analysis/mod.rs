//! Regret, closed-form bounds and smoothness experiments.

mod perturb;
mod regret;
mod sweep;
mod synthetic;

pub use perturb::{
    perturbation_search, tightness_profile, tightness_search, PerturbationReport, TightnessReport,
    TightnessRow,
};
pub use regret::{
    check_individual_fairness, metric_dp_marginal_bound, opt_value, regret, regret_lower_bound,
    regret_lower_bound_mean, regret_upper_bound_linear, softmax_regret_bound, MetricDpBound,
    FAIRNESS_TOL,
};
pub use sweep::{default_smoothness_grid, log_grid, regret_smoothness_sweep, SweepRow, SweepTable};
pub use synthetic::synthetic_beta_reviews;
