//! Adaptive tests for bandedness of high-dimensional covariance matrices.
//!
//! The crate computes a family of unbiased U-statistics `U(a)` for the
//! covariances outside a band of width `k`, their variance estimates, single
//! order and adaptive (minimum-p and Fisher) tests, an adaptive bandwidth
//! estimator, covariance model generators and a Monte Carlo harness.

pub mod accumulate;
pub mod bandwidth;
pub mod cli;
pub mod datagen;
pub mod distinct;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod oracle;
pub mod sample;
pub mod special;
pub mod sweep;
pub mod ustat;

pub use distinct::distinct_product_sum;
pub use error::{Error, Result};
pub use sample::{off_band_pairs, BandSpec, SampleMatrix};
pub use sweep::{band_sweep, BandSweep};
pub use ustat::{u_stat, u_stat_tilde, variance_estimate, StatValue, Warning};
pub use bandwidth::{estimate_bandwidth, t_path, BandwidthConfig, BandwidthResult};
pub use datagen::{build_setting, CovarianceModel, Distribution, Setting, SettingParams};
pub use hypothesis::{
    adaptive_test, combine_fisher, combine_min, single_order_test, AdaptiveResult, Method, OrderSet, UStatResult,
};
pub use harness::{
    run_bandwidth_experiment, run_diagnostic_experiment, run_power_experiment, run_size_experiment,
    theoretical_power, trace_ratio_diagnostic, ExperimentConfig, ExperimentReport, GridPoint, ModelSpec, TestName,
};
