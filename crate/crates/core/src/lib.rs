//! Variable selection for linear regression by penalized hard thresholding.
//!
//! Given an initial estimate `β̂` (OLS, ridge or adaptive ridge), every
//! distinct coefficient magnitude is a candidate threshold. Each threshold
//! excludes the columns at or below it and refits least squares on the rest;
//! the threshold minimizing refit risk plus a SWIC-type penalty
//! `(c / δ^r) · ln n / √n` is selected, and `β̂` is hard-thresholded at it.
//!
//! - [`estimators`]: datasets, OLS / ridge / adaptive ridge, restricted refits
//! - [`thresholding`]: threshold paths, risk profiles, selection, FNR/TNR
//! - [`simulation`]: seeded Monte Carlo harness for the S1/S2 designs
//! - [`dataio`]: CSV ingestion, standardization, interactions, reports
//! - [`cli`]: the `varthresh` command line

pub mod cli;
pub mod dataio;
pub mod error;
pub mod estimators;
mod lstsq;
pub mod simulation;
pub mod thresholding;

pub use error::{Error, Result};
pub use estimators::{
    fit_adaptive_ridge, fit_ols, fit_ridge, least_squares_on_support, CoefficientVector, Dataset,
    EstimatorConfig, Method, RestrictedFit, RidgeLambda, Support,
};
pub use simulation::{AggregateReport, ReplicationOutcome, ScenarioSpec};
pub use thresholding::{
    build_empirical_path, select_threshold, PenaltySpec, RiskProfile, SelectionResult,
    ThresholdMode, ThresholdPath,
};
