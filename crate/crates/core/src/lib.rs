//! Transfer learning for kernel ridge regression.
//!
//! [`fit_ah_tkrr`] transfers from a known set of similar sources by pooling
//! and then debiasing on the target. [`sa_tkrr`] handles unknown sources: it
//! ranks sources by estimated similarity, fits one candidate per nested
//! source set and aggregates at most two of them on held-out target data.

pub mod aggregate;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod krr;
pub mod matrix;
pub mod model;
pub mod par;
pub mod seed;
pub mod solve;
pub mod synthetic;
pub mod transfer;

pub use aggregate::{
    aew_aggregate, aew_weights, build_candidates, hyper_sparse_aggregate, prepare_candidates, rank_contrasts,
    sa_tkrr, split_t2, split_uniform, AggregateModel, AggregationParams, Candidate, CandidateSet, Phi,
    Selection,
};
pub use error::{Error, Result};
pub use kernel::{gram_matrix, kernel_eval, rkhs_norm_diff, KernelConfig, KernelFamily, RepresenterFunction};
pub use krr::{
    fit_krr, schedule_lambda_contrast, schedule_lambda_debias, schedule_lambda_source, KrrModel,
    LambdaSchedule,
};
pub use matrix::{Dataset, Matrix};
pub use model::{empirical_risk, Predictor};
pub use par::Execution;
pub use solve::spd_solve;
pub use transfer::{fit_ah_tkrr, fit_ah_tkrr_wd, fit_debias, fit_pooled, SourceCollection, TransferModel};
