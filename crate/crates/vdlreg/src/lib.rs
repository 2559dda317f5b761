//! Bayesian local regression that tolerates arbitrarily missing covariates
//! without imputation.
//!
//! The model clusters observations with a covariate-dependent random
//! partition whose similarity functions skip missing entries, and equips each
//! cluster with a Gaussian response model whose mean is linear in the
//! observed, cluster-standardized covariates. Missing covariates are
//! projected out analytically: the conditional mean drops their terms and the
//! variance inflates by their squared coefficients, so any missingness
//! pattern — including patterns never seen in training — yields a coherent
//! predictive density. Cluster-local coefficients carry an aggressive
//! global-local shrinkage prior, so the flat-mean model is recovered in the
//! limit of full shrinkage.
//!
//! The crate provides the data model ([`data`]), the partition prior
//! ([`prior`]), the projected likelihood ([`likelihood`]), a full Gibbs
//! sampler ([`mcmc`]), posterior prediction ([`predict`]), evaluation metrics
//! ([`metrics`]), a fast local-linearity screen ([`screen`]), and synthetic
//! data generators ([`sim`]).

pub mod config;
pub mod data;
pub mod error;
pub mod gig;
pub mod likelihood;
pub mod mcmc;
pub mod metrics;
pub mod predict;
pub mod prior;
pub mod samplers;
pub mod screen;
pub mod sim;

pub use config::{
    AllocationKernel, InitPartition, LikelihoodPath, McmcConfig, MeanModel, ModelConfig, TauKernel,
};
pub use data::{
    load_dataset, load_dataset_from, plugin_stats, standardized_covariate, CellStats, Dataset,
    LoadOptions, MoveEffect, Partition, PartitionState, PluginCell, PluginPriors, Standardization,
};
pub use error::{Error, Result};
pub use likelihood::{Baseline, ClusterParams};
pub use prior::{Similarity, SimilarityParams};
