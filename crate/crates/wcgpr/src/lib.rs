//! Widely complex Gaussian-process regression.
//!
//! Covers the augmented/composite representations of complex random vectors,
//! kernel plus pseudo-kernel pairs (closed-form and widely-linear-filter
//! induced), widely linear MMSE and GP predictors with their strict
//! counterparts, synthesis of improper Gaussian processes by widely linear
//! filtering of white noise, and a reproducible Monte-Carlo experiment runner.

pub mod augmented;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod kernels;
pub mod linalg;
pub mod synthesis;

pub use augmented::{
    solve_augmented, to_augmented, to_composite, AugmentedMatrix, AugmentedVector,
    CompositeVector, STRUCTURE_TOL,
};
pub use error::{Error, Result};
pub use estimators::{
    composite_gpr_predict, lmmse, log_marginal_likelihood, proper_cgpr_predict,
    properness_residual, reduction_residual, wcgpr_predict, wlmmse, CompositePredictive,
    NoiseModel, PredictiveDistribution, ProperCgprFit, SecondOrderStats, WcgprFit,
};
pub use experiment::{
    mse_db, run_single, run_sweep, ExperimentConfig, ExperimentReport, PredictorSelection,
    SummaryRecord, TrialRecord,
};
pub use kernels::{
    augmented_gram, filter_induced_kernel, gram, validate_kernel_pair, ComplexInputSet,
    KernelDescriptor, KernelPair, KernelValidationReport,
};
pub use linalg::JitterPolicy;
pub use synthesis::{
    empirical_second_order, generate_improper_gp, generate_improper_noise, Axis, FilterTaps,
    GridSampleFunction, GridSpec, ProcessSampler, WidelyLinearFilterModel,
};
