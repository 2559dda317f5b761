//! Posterior predictive machinery: allocation weights for a new observation,
//! the mixture density over its response, mean surfaces, predictive draws,
//! and quantile residuals.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::data::{plugin_stats, CellStats, Dataset, PartitionState, PluginCell};
use crate::error::{Error, Result};
use crate::likelihood::{draw_cluster_params, projected_moments, Baseline, ClusterParams};
use crate::mcmc::{DrawRecord, PosteriorSamples};
use crate::prior::{log_sum_exp, Similarity};

fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Allocation weights for a query point over the current clusters plus one
/// unoccupied cluster, normalized.
pub fn predictive_weights(
    x: &[f64],
    mask: &[bool],
    state: &PartitionState,
    mass: f64,
    sim: &Similarity,
) -> Vec<f64> {
    let k = state.k();
    let mut lw = Vec::with_capacity(k + 1);
    for h in 0..k {
        let mut w = (state.size(h) as f64).ln();
        for (l, (&xv, &obs)) in x.iter().zip(mask.iter()).enumerate() {
            if obs {
                w += sim.for_col(l).log_ratio(state.cell(h, l), xv);
            }
        }
        lw.push(w);
    }
    let mut w_new = mass.ln();
    for (l, (&xv, &obs)) in x.iter().zip(mask.iter()).enumerate() {
        if obs {
            w_new += sim.for_col(l).log_marginal(&CellStats::default().with(xv));
        }
    }
    lw.push(w_new);
    let lse = log_sum_exp(&lw);
    lw.iter().map(|v| (v - lse).exp()).collect()
}

/// Gaussian mixture describing the predictive density of one query point.
#[derive(Debug, Clone)]
pub struct PredictiveMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl PredictiveMixture {
    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(w, (m, v))| w * (m * m + v))
            .sum();
        (second - mean * mean).max(0.0)
    }

    pub fn log_density(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, (m, v))| w.ln() + crate::likelihood::normal_logpdf(y, *m, *v))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(w, (m, v))| w * normal_cdf((y - m) / v.sqrt()))
            .sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut comp = self.weights.len() - 1;
        for (idx, &w) in self.weights.iter().enumerate() {
            cum += w;
            if u < cum {
                comp = idx;
                break;
            }
        }
        let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        self.means[comp] + self.vars[comp].sqrt() * z
    }
}

/// Mixture mean, the weighted sum of component means.
pub fn predictive_mean(mix: &PredictiveMixture) -> f64 {
    mix.mean()
}

/// Build the predictive mixture at one draw's state.
///
/// By convention the component plug-ins come from the training members only;
/// with `include_query` each occupied component instead pretends the query
/// joined that cluster (sensitivity analysis). The unoccupied component uses
/// the fresh prior draw `theta_new` with the prior plug-in guesses (or the
/// query's own singleton plug-ins under `include_query`).
pub fn predictive_mixture(
    x: &[f64],
    mask: &[bool],
    state: &mut PartitionState,
    params: &[ClusterParams],
    theta_new: &ClusterParams,
    model: &ModelConfig,
    include_query: bool,
) -> PredictiveMixture {
    let weights = predictive_weights(x, mask, state, model.mass, &model.similarity);
    let k = state.k();
    let p = x.len();
    let mut means = Vec::with_capacity(k + 1);
    let mut vars = Vec::with_capacity(k + 1);
    let mut scratch = vec![PluginCell { mean: 0.0, var: 1.0 }; p];
    for h in 0..k {
        state.refresh_plugins(h);
        let plugins = if include_query {
            for l in 0..p {
                let cell = if mask[l] {
                    state.cell(h, l).with(x[l])
                } else {
                    *state.cell(h, l)
                };
                scratch[l] = plugin_stats(&cell, state.priors());
            }
            &scratch[..]
        } else {
            state.plugins_ref(h)
        };
        let (mean, var) = projected_moments(x, mask, &params[h], plugins);
        means.push(mean);
        vars.push(var);
    }
    for l in 0..p {
        let cell = if include_query && mask[l] {
            CellStats::default().with(x[l])
        } else {
            CellStats::default()
        };
        scratch[l] = plugin_stats(&cell, &model.plugin);
    }
    let (mean, var) = projected_moments(x, mask, theta_new, &scratch);
    means.push(mean);
    vars.push(var);
    PredictiveMixture {
        weights,
        means,
        vars,
    }
}

/// Point-prediction options.
#[derive(Debug, Clone)]
pub struct PredictOptions {
    /// quantile levels reported per point
    pub quantiles: Vec<f64>,
    /// fold the query covariates into the plug-ins (sensitivity analysis;
    /// the reference convention keeps plug-ins training-only)
    pub include_query_in_plugins: bool,
    pub seed: u64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            quantiles: vec![0.025, 0.5, 0.975],
            include_query_in_plugins: false,
            seed: 0,
        }
    }
}

/// Posterior summary for one query point.
#[derive(Debug, Clone)]
pub struct PointPrediction {
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<(f64, f64)>,
    /// predictive CDF at the observed response, when one was supplied
    pub quantile_residual: Option<f64>,
    /// posterior mean of the log predictive density at the observed response
    pub mean_log_density: Option<f64>,
}

/// Posterior predictive evaluator over a set of retained draws.
pub struct Predictor<'a> {
    ds: &'a Dataset,
    model: &'a ModelConfig,
    samples: &'a PosteriorSamples,
    states: Vec<PartitionState>,
    params: Vec<Vec<ClusterParams>>,
    include_query: bool,
}

impl<'a> Predictor<'a> {
    pub fn new(
        ds: &'a Dataset,
        model: &'a ModelConfig,
        samples: &'a PosteriorSamples,
    ) -> Result<Self> {
        Self::with_options(ds, model, samples, false)
    }

    pub fn with_options(
        ds: &'a Dataset,
        model: &'a ModelConfig,
        samples: &'a PosteriorSamples,
        include_query_in_plugins: bool,
    ) -> Result<Self> {
        if samples.m != ds.n_rows() || samples.p != ds.n_cols() {
            return Err(Error::DimensionMismatch(
                "posterior samples do not match the training data".into(),
            ));
        }
        if samples.draws.is_empty() {
            return Err(Error::InvalidArgument("no retained draws".into()));
        }
        let mut states = Vec::with_capacity(samples.draws.len());
        let mut params = Vec::with_capacity(samples.draws.len());
        for draw in &samples.draws {
            let labels: Vec<usize> = draw.labels.iter().map(|&c| c as usize).collect();
            let mut st = PartitionState::from_labels(ds, &labels, model.plugin)?;
            for j in 0..st.k() {
                st.refresh_plugins(j);
            }
            states.push(st);
            params.push(draw_params(draw, ds.n_cols(), model));
        }
        Ok(Self {
            ds,
            model,
            samples,
            states,
            params,
            include_query: include_query_in_plugins,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.states.len()
    }

    /// All per-draw mixtures for one query point; the basis of every summary.
    pub fn mixtures(&mut self, x: &[f64], mask: &[bool], seed: u64) -> Vec<PredictiveMixture> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(self.n_draws());
        for d in 0..self.n_draws() {
            let draw = &self.samples.draws[d];
            let baseline = Baseline {
                mu0: draw.mu0,
                sigma0: draw.sigma0,
            };
            let theta_new = draw_cluster_params(
                &mut rng,
                self.ds.n_cols(),
                &baseline,
                self.model.a_sigma,
                self.model.tau0,
                self.model.linear(),
            );
            out.push(predictive_mixture(
                x,
                mask,
                &mut self.states[d],
                &self.params[d],
                &theta_new,
                self.model,
                self.include_query,
            ));
        }
        out
    }

    /// Summarize one query point against the whole posterior. `point_seed`
    /// individualizes the unoccupied-component draws per query point.
    pub fn predict(
        &mut self,
        x: &[f64],
        mask: &[bool],
        y_obs: Option<f64>,
        opts: &PredictOptions,
        point_seed: u64,
    ) -> Result<PointPrediction> {
        if x.len() != self.ds.n_cols() || mask.len() != x.len() {
            return Err(Error::DimensionMismatch("query point shape".into()));
        }
        let mixtures = self.mixtures(x, mask, opts.seed.wrapping_add(point_seed));
        let n = mixtures.len() as f64;
        let mean: f64 = mixtures.iter().map(|m| m.mean()).sum::<f64>() / n;
        let second: f64 = mixtures
            .iter()
            .map(|m| {
                let mu = m.mean();
                m.variance() + mu * mu
            })
            .sum::<f64>()
            / n;
        let sd = (second - mean * mean).max(0.0).sqrt();
        let cdf = |y: f64| mixtures.iter().map(|m| m.cdf(y)).sum::<f64>() / n;
        let quantiles = opts
            .quantiles
            .iter()
            .map(|&q| (q, invert_cdf(&cdf, q, &mixtures)))
            .collect();
        let (qres, mld) = match y_obs {
            Some(y) => {
                let qres = cdf(y);
                let mld = mixtures.iter().map(|m| m.log_density(y)).sum::<f64>() / n;
                (Some(qres), Some(mld))
            }
            None => (None, None),
        };
        Ok(PointPrediction {
            mean,
            sd,
            quantiles,
            quantile_residual: qres,
            mean_log_density: mld,
        })
    }
}

fn draw_params(draw: &DrawRecord, p: usize, model: &ModelConfig) -> Vec<ClusterParams> {
    draw.clusters
        .iter()
        .map(|c| {
            let mut th = ClusterParams::flat(p, c.mu_star, c.sigma_star, model.tau0);
            th.beta = c.beta.clone();
            th.tau = c.tau;
            th
        })
        .collect()
}

fn invert_cdf<F: Fn(f64) -> f64>(cdf: &F, q: f64, mixtures: &[PredictiveMixture]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m in mixtures {
        for (mu, v) in m.means.iter().zip(&m.vars) {
            let s = v.sqrt();
            lo = lo.min(mu - 40.0 * s);
            hi = hi.max(mu + 40.0 * s);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Draw predictive responses for one query point: each retained posterior
/// draw contributes by sampling an allocation from the weights and then the
/// matching Gaussian component. Deterministic in the seed.
pub fn sample_predictive(
    predictor: &mut Predictor<'_>,
    x: &[f64],
    mask: &[bool],
    n_draws: usize,
    seed: u64,
) -> Vec<f64> {
    let mixtures = predictor.mixtures(x, mask, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..n_draws)
        .map(|t| mixtures[t % mixtures.len()].sample(&mut rng))
        .collect()
}

/// Posterior-averaged predictive CDF at an observed response.
pub fn quantile_residual(
    predictor: &mut Predictor<'_>,
    x: &[f64],
    mask: &[bool],
    y_obs: f64,
    seed: u64,
) -> f64 {
    let mixtures = predictor.mixtures(x, mask, seed);
    mixtures.iter().map(|m| m.cdf(y_obs)).sum::<f64>() / mixtures.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PluginPriors;
    use approx::assert_relative_eq;

    fn tiny_state() -> (Dataset, PartitionState) {
        // clusters of sizes 2 and 3
        let y = vec![0.0, 0.1, 1.0, 1.1, 0.9];
        let x = vec![0.0, 0.1, 1.0, 1.1, 0.9];
        let mask = vec![true; 5];
        let ds = Dataset::from_parts(y, x, mask, vec!["a".into()], "y").unwrap();
        let st = PartitionState::from_labels(&ds, &[0, 0, 1, 1, 1], PluginPriors::default()).unwrap();
        (ds, st)
    }

    #[test]
    fn weights_with_no_observed_covariates_follow_sizes() {
        let (_ds, st) = tiny_state();
        let sim = Similarity::shared(crate::prior::SimilarityParams::nnsichi2_default());
        let w = predictive_weights(&[0.0], &[false], &st, 1.0, &sim);
        assert_relative_eq!(w[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 1.0 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(w[2], 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_mean_is_weighted_component_mean() {
        let mix = PredictiveMixture {
            weights: vec![0.5, 0.5],
            means: vec![0.0, 2.0],
            vars: vec![1.0, 1.0],
        };
        assert_relative_eq!(predictive_mean(&mix), 1.0, epsilon = 1e-15);
        let single = PredictiveMixture {
            weights: vec![1.0],
            means: vec![-0.3],
            vars: vec![0.5],
        };
        assert_relative_eq!(predictive_mean(&single), -0.3, epsilon = 1e-15);
    }

    #[test]
    fn cdf_limits_and_median() {
        let mix = PredictiveMixture {
            weights: vec![1.0],
            means: vec![0.7],
            vars: vec![2.0],
        };
        assert_relative_eq!(mix.cdf(0.7), 0.5, epsilon = 1e-12);
        assert!(mix.cdf(-1e4) < 1e-12);
        assert!(mix.cdf(1e4) > 1.0 - 1e-12);
    }

    #[test]
    fn cdf_is_monotone() {
        let mix = PredictiveMixture {
            weights: vec![0.3, 0.7],
            means: vec![-1.0, 2.0],
            vars: vec![0.2, 1.5],
        };
        let mut prev = 0.0;
        for t in -50..=50 {
            let c = mix.cdf(t as f64 * 0.1);
            assert!(c >= prev - 1e-15);
            prev = c;
        }
    }
}
