//! Nonparametric ROC analysis for a continuous biomarker when the disease
//! label is an imperfect reference standard with known accuracy.
//!
//! The log density ratio between diseased and healthy biomarker densities is
//! modeled by a penalized B-spline expansion and fit by an EM algorithm that
//! treats the true disease status as missing. Hájek-weighted CDF estimates
//! then give the ROC curve, AUC, partial AUC and Youden's index.
//!
//! Module map:
//! - [`basis`]: B-spline basis, roughness penalty, unit-domain transform
//! - [`likelihood`]: model constants, observed log-likelihood, penalized objective
//! - [`solver`]: E-step, penalized IRLS M-step, EM driver
//! - [`tuning`]: stratified cross-validation of the penalty weight
//! - [`estimators`]: weighted CDFs, ROC, AUC, pAUC, Youden, marker comparison
//! - [`baselines`]: ECDF inversion estimator and the naive fit
//! - [`simharness`]: Gaussian designs, truth oracles, Monte Carlo runner
//! - [`cli`]: CSV ingestion, reports and the `rocem` subcommands

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod basis;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod likelihood;
pub mod simharness;
pub mod solver;
pub mod tuning;

pub use basis::{fit_transform, DomainTransform, SplineBasis};
pub use error::{Error, Result};

pub use likelihood::{MixtureRates, ModelConstants, PenalizedProblem, TwoSampleData};
pub use solver::{fit_em, DensityRatioFit, EmOptions};

pub use estimators::{RocSummary, WeightedCdfPair};
pub use tuning::{cv_select_nu, CvPlan, CvResult};
