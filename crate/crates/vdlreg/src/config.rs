//! Model and sampler configuration.

use crate::data::PluginPriors;
use crate::error::{Error, Result};
use crate::prior::Similarity;
use crate::samplers::SliceConfig;

/// Whether cluster means carry local linear predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanModel {
    /// constant cluster means (coefficients pinned at zero, no shrinkage block)
    Flat,
    /// cluster-local linear predictors with shrinkage
    Linear,
}

/// Full model specification.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub mean_model: MeanModel,
    /// cohesion precision mass
    pub mass: f64,
    pub similarity: Similarity,
    /// prior mean of the baseline location
    pub m0: f64,
    /// prior standard deviation of the baseline location
    pub v: f64,
    /// upper bound of the uniform prior on the baseline scale
    pub a_sigma0: f64,
    /// upper bound of the uniform prior on cluster error scales
    pub a_sigma: f64,
    /// global shrinkage scale
    pub tau0: f64,
    pub plugin: PluginPriors,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mean_model: MeanModel::Linear,
            mass: 1.0,
            similarity: Similarity::shared(crate::prior::SimilarityParams::nnsichi2_default()),
            m0: 0.0,
            v: 2.0,
            a_sigma0: 5.0,
            a_sigma: 2.0,
            tau0: 0.1,
            plugin: PluginPriors::default(),
        }
    }
}

impl ModelConfig {
    pub fn linear(&self) -> bool {
        self.mean_model == MeanModel::Linear
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidConfig("mass must be positive".into()));
        }
        self.similarity.validate(p)?;
        if !self.m0.is_finite() || !(self.v > 0.0) {
            return Err(Error::InvalidConfig("baseline location prior".into()));
        }
        if !(self.a_sigma0 > 0.0) || !(self.a_sigma > 0.0) {
            return Err(Error::InvalidConfig("scale bounds must be positive".into()));
        }
        if !(self.tau0 > 0.0) {
            return Err(Error::InvalidConfig("tau0 must be positive".into()));
        }
        if !(self.plugin.nu > 0.0)
            || !(self.plugin.nu_s > 0.0)
            || !(self.plugin.s0sq_x > 0.0)
            || !self.plugin.mu0_x.is_finite()
        {
            return Err(Error::InvalidConfig("plug-in priors".into()));
        }
        Ok(())
    }
}

/// Which transition kernel updates the cluster allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationKernel {
    /// Metropolized proposals that avoid sampling-density evaluation
    Mh,
    /// full-conditional draw over all clusters (quadratic in the sample
    /// size; retained as a correctness cross-check at small m)
    Gibbs,
}

/// Which kernel updates the global shrinkage scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauKernel {
    /// joint update of the allocation weights and the scale through
    /// independent GIG draws
    Gig,
    /// univariate slice update of log tau against its exact conditional
    Slice,
}

/// Which likelihood evaluator the sampler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodPath {
    /// flat mean models skip plug-in evaluation entirely
    Auto,
    /// always run the projected evaluator, even with zero coefficients
    Generic,
}

/// Initial partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum InitPartition {
    Single,
    Random { k: usize },
}

/// Sampler run configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    /// probability of selecting the singleton-type allocation proposal
    pub prob_type1: f64,
    pub slice: SliceConfig,
    pub ess_max_shrink: u32,
    pub allocation_kernel: AllocationKernel,
    pub tau_kernel: TauKernel,
    pub likelihood_path: LikelihoodPath,
    pub init: InitPartition,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            n_burn: 1000,
            thin: 1,
            seed: 0,
            prob_type1: 0.5,
            slice: SliceConfig::default(),
            ess_max_shrink: 100,
            allocation_kernel: AllocationKernel::Mh,
            tau_kernel: TauKernel::Gig,
            likelihood_path: LikelihoodPath::Auto,
            init: InitPartition::Single,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::InvalidConfig(
                "n_burn must be smaller than n_iter".into(),
            ));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.prob_type1 > 0.0 && self.prob_type1 < 1.0) {
            return Err(Error::InvalidConfig(
                "prob_type1 must lie strictly inside (0, 1)".into(),
            ));
        }
        if !(self.slice.width > 0.0) {
            return Err(Error::InvalidConfig("slice width must be positive".into()));
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }
}
