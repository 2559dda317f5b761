//! Cohesion and similarity computations: the log prior over partitions given
//! observed covariates, and the two-observation co-clustering utility.
//!
//! Similarity marginals are evaluated in closed form from sufficient
//! statistics, so permuting the values of a cell cannot change the result and
//! single-value ratios are O(1).

use statrs::function::gamma::ln_gamma;

use crate::data::{CellStats, Dataset, PartitionState};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Dirichlet-process cohesion: `c(S | M) = M * (|S| - 1)!` on the log scale.
/// Sizes one and two contribute exactly `ln M`, so cohesion-only
/// computations stay exact.
pub fn log_cohesion(size: usize, mass: f64) -> f64 {
    assert!(size >= 1, "cohesion of an empty cluster");
    if size <= 2 {
        mass.ln()
    } else {
        mass.ln() + ln_gamma(size as f64)
    }
}

/// One conjugate auxiliary model for a single covariate.
///
/// Each variant yields a closed-form marginal density of a set of observed
/// values with the latent location (and scale, where present) integrated out.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SimilarityParams {
    /// Gaussian kernel with known variance and a Gaussian prior on the mean.
    Nn {
        prior_mean: f64,
        prior_var: f64,
        kernel_var: f64,
    },
    /// Gaussian kernel, Gaussian mean prior scaled by the kernel variance,
    /// inverse-gamma prior on the kernel variance.
    Nnig {
        prior_mean: f64,
        kappa: f64,
        shape: f64,
        scale: f64,
    },
    /// The inverse-gamma similarity reparameterized as scaled inverse
    /// chi-squared: `df` acts as a prior effective sample size concentrated
    /// around the bandwidth guess `scale_sq`.
    NnsiChi2 {
        prior_mean: f64,
        kappa: f64,
        df: f64,
        scale_sq: f64,
    },
}

impl SimilarityParams {
    /// Defaults for standardized covariates.
    pub fn nnsichi2_default() -> Self {
        SimilarityParams::NnsiChi2 {
            prior_mean: 0.0,
            kappa: 0.1,
            df: 4.0,
            scale_sq: 0.04,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SimilarityParams::Nn {
                prior_mean,
                prior_var,
                kernel_var,
            } => prior_mean.is_finite() && prior_var > 0.0 && kernel_var > 0.0,
            SimilarityParams::Nnig {
                prior_mean,
                kappa,
                shape,
                scale,
            } => prior_mean.is_finite() && kappa > 0.0 && shape > 0.0 && scale > 0.0,
            SimilarityParams::NnsiChi2 {
                prior_mean,
                kappa,
                df,
                scale_sq,
            } => prior_mean.is_finite() && kappa > 0.0 && df > 0.0 && scale_sq > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "similarity parameters out of range: {self:?}"
            )))
        }
    }

    /// Log marginal of a cell from its sufficient statistics. The empty cell
    /// returns 0 (the empty-product convention).
    pub fn log_marginal(&self, cell: &CellStats) -> f64 {
        if cell.n == 0 {
            return 0.0;
        }
        let n = cell.n as f64;
        match *self {
            SimilarityParams::Nn {
                prior_mean,
                prior_var,
                kernel_var,
            } => {
                let a = n / kernel_var + 1.0 / prior_var;
                let b = cell.sum / kernel_var + prior_mean / prior_var;
                let c = cell.sumsq / kernel_var + prior_mean * prior_mean / prior_var;
                -0.5 * n * (LN_2PI + kernel_var.ln())
                    - 0.5 * prior_var.ln()
                    - 0.5 * a.ln()
                    - 0.5 * (c - b * b / a)
            }
            SimilarityParams::Nnig {
                prior_mean,
                kappa,
                shape,
                scale,
            } => nig_log_marginal(cell, prior_mean, kappa, shape, scale),
            SimilarityParams::NnsiChi2 {
                prior_mean,
                kappa,
                df,
                scale_sq,
            } => nig_log_marginal(cell, prior_mean, kappa, 0.5 * df, 0.5 * df * scale_sq),
        }
    }

    /// Log marginal of explicit values. Values are accumulated in sorted
    /// order so any permutation of the input gives a bit-identical result.
    pub fn log_marginal_values(&self, values: &[f64]) -> Result<f64> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("similarity input".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(self.log_marginal(&CellStats::from_values(&sorted)))
    }

    /// `log_marginal(cell + x) - log_marginal(cell)`, computed incrementally.
    pub fn log_ratio(&self, cell: &CellStats, x: f64) -> f64 {
        self.log_marginal(&cell.with(x)) - self.log_marginal(cell)
    }
}

/// Marginal likelihood of a normal-inverse-gamma cell.
fn nig_log_marginal(cell: &CellStats, m0: f64, k0: f64, a0: f64, b0: f64) -> f64 {
    let n = cell.n as f64;
    let xbar = cell.sum / n;
    let ss = (cell.sumsq - n * xbar * xbar).max(0.0);
    let kn = k0 + n;
    let an = a0 + 0.5 * n;
    let bn = b0 + 0.5 * ss + 0.5 * (k0 * n / kn) * (xbar - m0) * (xbar - m0);
    -0.5 * n * LN_2PI + 0.5 * (k0.ln() - kn.ln()) + ln_gamma(an) - ln_gamma(a0) + a0 * b0.ln()
        - an * bn.ln()
}

/// Per-covariate similarity configuration; one shared parameterization unless
/// overridden per covariate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Similarity {
    params: Vec<SimilarityParams>,
}

impl Similarity {
    pub fn shared(params: SimilarityParams) -> Self {
        Self {
            params: vec![params],
        }
    }

    pub fn per_covariate(params: Vec<SimilarityParams>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidConfig("empty similarity list".into()));
        }
        Ok(Self { params })
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.params.len() != 1 && self.params.len() != p {
            return Err(Error::InvalidConfig(format!(
                "similarity list has {} entries for {} covariates",
                self.params.len(),
                p
            )));
        }
        for s in &self.params {
            s.validate()?;
        }
        Ok(())
    }

    #[inline]
    pub fn for_col(&self, l: usize) -> &SimilarityParams {
        if self.params.len() == 1 {
            &self.params[0]
        } else {
            &self.params[l]
        }
    }

    /// Joint log similarity of a single observation's observed covariates
    /// (i.e. the new-cluster weight without the cohesion factor).
    pub fn log_single(&self, x: &[f64], observed: &[usize]) -> f64 {
        observed
            .iter()
            .map(|&l| self.for_col(l).log_marginal(&CellStats::default().with(x[l])))
            .sum()
    }
}

/// Unnormalized log prior of the current partition: cohesion plus per-cell
/// similarity, summed over clusters.
pub fn log_partition_prior(state: &PartitionState, mass: f64, sim: &Similarity) -> f64 {
    let mut total = 0.0;
    for j in 0..state.k() {
        total += log_cohesion(state.size(j), mass);
        for (l, cell) in state.cells(j).iter().enumerate() {
            total += sim.for_col(l).log_marginal(cell);
        }
    }
    total
}

/// Same quantity from explicit labels (used by enumeration oracles).
pub fn log_partition_prior_labels(
    ds: &Dataset,
    labels: &[usize],
    mass: f64,
    sim: &Similarity,
) -> Result<f64> {
    let state = PartitionState::from_labels(ds, labels, crate::data::PluginPriors::default())?;
    Ok(log_partition_prior(&state, mass, sim))
}

/// Prior probability that two observations share a cluster, under arbitrary
/// missingness in either covariate vector.
pub fn co_cluster_probability(
    x1: &[f64],
    obs1: &[bool],
    x2: &[f64],
    obs2: &[bool],
    mass: f64,
    sim: &Similarity,
) -> Result<f64> {
    let p = x1.len();
    if x2.len() != p || obs1.len() != p || obs2.len() != p {
        return Err(Error::DimensionMismatch(
            "covariate vectors and masks must share one length".into(),
        ));
    }
    // together: one cluster of both observations
    let mut lw_12 = log_cohesion(2, mass);
    for l in 0..p {
        let mut cell = CellStats::default();
        if obs1[l] {
            cell.add(x1[l]);
        }
        if obs2[l] {
            cell.add(x2[l]);
        }
        lw_12 += sim.for_col(l).log_marginal(&cell);
    }
    // apart: two singletons
    let mut lw_1x2 = 2.0 * log_cohesion(1, mass);
    for l in 0..p {
        if obs1[l] {
            lw_1x2 += sim.for_col(l).log_marginal(&CellStats::default().with(x1[l]));
        }
        if obs2[l] {
            lw_1x2 += sim.for_col(l).log_marginal(&CellStats::default().with(x2[l]));
        }
    }
    let mx = lw_12.max(lw_1x2);
    Ok(((lw_12 - mx).exp()) / ((lw_12 - mx).exp() + (lw_1x2 - mx).exp()))
}

/// Log-sum-exp over a slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mx = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + values.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}
