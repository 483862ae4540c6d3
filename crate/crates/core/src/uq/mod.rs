//! Uncertainty quantification: sampling, Monte Carlo and control-variate
//! multilevel estimators, multi-fidelity collocation and error metrics.

mod estimators;
mod fields;
mod metrics;
mod multifidelity;
mod quadrature;
mod sampling;

pub use estimators::{
    combine_levels, lambda_coeff, mc_estimate, mlmc_estimate, pairwise_sum, run_levels, sample_variance,
    variance_field, LambdaField, LambdaMode, LevelSamples, LevelSpec, MlmcEstimate, MlmcOptions,
    VarianceField,
};
pub use fields::{FieldSet, Quantity};
pub use metrics::{err_global, err_mean_l2, err_pointwise, l2_norm};
pub use multifidelity::{fidelity_coeffs, multifidelity_eval, select_points, Fidelity, Selection, SnapshotBasis};
pub use quadrature::{gauss_rule_from_moments, scaled_uniform_sum_rule, QuadratureRule};
pub use sampling::{draw_samples, draw_samples_at, RandomSample, HELD_OUT_STREAM};
