//! Metrics, cross-validation and the statistics reported on top of them.

mod cv;
mod metrics;
mod residual;
mod stats;

pub use cv::{cross_validate, cross_validate_with, kfold_split, CvOptions, CvResult, EvalTarget};
pub use metrics::{mae_rmse, mse};
pub use residual::residual_region_means;
pub use stats::{
    delta_bias, incomplete_beta, intervals_overlap, neumaier_sum, paired_t_test, sem_errorbar, student_t_two_sided,
    BiasReduction, TTest,
};
