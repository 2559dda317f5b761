//! The Gibbs sampler: Metropolized allocation updates that avoid
//! sampling-density evaluation, conjugate and slice updates for cluster and
//! baseline parameters, elliptical slice updates for coefficients, and
//! blocked updates for the shrinkage augmentation.

mod allocation;
mod updates;

pub use allocation::{type2_log_acceptance, update_allocations};
pub use updates::{
    update_baseline, update_beta_star, update_dl_hypers, update_mu_star, update_sigma_star,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{InitPartition, LikelihoodPath, McmcConfig, ModelConfig};
use crate::data::{Dataset, PartitionState, PluginCell};
use crate::error::{Error, Result};
use crate::likelihood::{
    cluster_loglik, dl_logprior, draw_cluster_params, normal_logpdf, obs_loglik, Baseline,
    ClusterParams,
};
use crate::prior::log_partition_prior;

/// Proposal/acceptance counters for the allocation kernel.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct AcceptanceStats {
    pub type1a_proposed: u64,
    pub type1a_accepted: u64,
    pub type1b_proposed: u64,
    pub type1b_accepted: u64,
    pub type2_proposed: u64,
    pub type2_accepted: u64,
}

impl AcceptanceStats {
    pub fn rate(proposed: u64, accepted: u64) -> f64 {
        if proposed == 0 {
            f64::NAN
        } else {
            accepted as f64 / proposed as f64
        }
    }
}

/// Complete mutable state of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub part: PartitionState,
    pub params: Vec<ClusterParams>,
    pub baseline: Baseline,
}

impl ChainState {
    pub fn init<R: Rng>(
        ds: &Dataset,
        model: &ModelConfig,
        cfg: &McmcConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let m = ds.n_rows();
        let p = ds.n_cols();
        let part = match cfg.init {
            InitPartition::Single => PartitionState::single_cluster(ds, model.plugin),
            InitPartition::Random { k } => {
                let k = k.clamp(1, m);
                let mut labels = vec![0usize; m];
                for (i, label) in labels.iter_mut().enumerate() {
                    *label = if i < k { i } else { rng.random_range(0..k) };
                }
                PartitionState::from_labels(ds, &labels, model.plugin)?
            }
        };
        let k = part.k();
        let params = (0..k)
            .map(|_| ClusterParams::flat(p, 0.0, model.a_sigma / 2.0, model.tau0))
            .collect();
        let baseline = Baseline {
            mu0: model.m0,
            sigma0: model.a_sigma0 / 2.0,
        };
        Ok(Self {
            part,
            params,
            baseline,
        })
    }

    pub fn k(&self) -> usize {
        self.part.k()
    }

    /// Whether the flat-mean fast path is active for this run.
    pub(crate) fn flat_fast(model: &ModelConfig, cfg: &McmcConfig) -> bool {
        !model.linear() && cfg.likelihood_path == LikelihoodPath::Auto
    }

    /// One full Gibbs scan: allocations, then every cluster's parameters,
    /// then the baseline.
    pub fn scan<R: Rng>(
        &mut self,
        ds: &Dataset,
        model: &ModelConfig,
        cfg: &McmcConfig,
        rng: &mut R,
        acc: &mut AcceptanceStats,
    ) -> Result<()> {
        let linear = model.linear();
        let mut draw_theta = |rng: &mut R, baseline: &Baseline| {
            draw_cluster_params(rng, ds.n_cols(), baseline, model.a_sigma, model.tau0, linear)
        };
        update_allocations(self, ds, model, cfg, rng, acc, &mut draw_theta)?;
        for j in 0..self.k() {
            self.part.refresh_plugins(j);
            update_mu_star(rng, ds, &mut self.part, &mut self.params[j], j, &self.baseline, model, cfg);
            update_sigma_star(rng, ds, &mut self.part, &mut self.params[j], j, model, cfg);
            if linear && ds.n_cols() > 0 {
                update_beta_star(rng, ds, &mut self.part, &mut self.params[j], j, model, cfg);
                update_dl_hypers(rng, &mut self.params[j], model, cfg)?;
            }
        }
        update_baseline(rng, self, model, cfg);
        Ok(())
    }

    /// Joint log posterior density up to the partition normalizing constant.
    pub fn log_posterior(&mut self, ds: &Dataset, model: &ModelConfig) -> f64 {
        let mut lp = normal_logpdf(self.baseline.mu0, model.m0, model.v * model.v);
        if self.baseline.sigma0 <= 0.0 || self.baseline.sigma0 >= model.a_sigma0 {
            return f64::NEG_INFINITY;
        }
        lp -= model.a_sigma0.ln();
        lp += log_partition_prior(&self.part, model.mass, &model.similarity);
        for j in 0..self.k() {
            let th = &self.params[j];
            if th.sigma_star <= 0.0 || th.sigma_star >= model.a_sigma {
                return f64::NEG_INFINITY;
            }
            lp += normal_logpdf(
                th.mu_star,
                self.baseline.mu0,
                self.baseline.sigma0 * self.baseline.sigma0,
            );
            lp -= model.a_sigma.ln();
            if model.linear() && ds.n_cols() > 0 {
                lp += dl_logprior(th, model.tau0).unwrap_or(f64::NEG_INFINITY);
            }
        }
        for j in 0..self.k() {
            self.part.refresh_plugins(j);
            lp += cluster_loglik(
                ds,
                self.part.members(j),
                &self.params[j],
                self.part.plugins_ref(j),
            );
        }
        lp
    }
}

/// Simulate a response vector from the sampling model at the current state;
/// used by the successive-conditional correctness checks and calibration
/// tests.
pub fn simulate_response<R: Rng>(
    ds: &Dataset,
    state: &mut ChainState,
    rng: &mut R,
) -> Vec<f64> {
    let m = ds.n_rows();
    let mut y = vec![0.0; m];
    for j in 0..state.part.k() {
        state.part.refresh_plugins(j);
        let theta = &state.params[j];
        let plugins = state.part.plugins_ref(j);
        for &i in state.part.members(j) {
            let mut mean = theta.mu_star;
            for &l in ds.pattern(i) {
                if theta.beta[l] != 0.0 {
                    mean += theta.beta[l] * plugins[l].standardize(ds.x(i, l));
                }
            }
            let mut var = theta.sigma_star * theta.sigma_star;
            for &l in ds.missing_pattern(i) {
                var += theta.beta[l] * theta.beta[l];
            }
            let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            y[i] = mean + var.sqrt() * z;
        }
    }
    y
}

/// Per-cluster values retained for one posterior draw.
#[derive(Debug, Clone)]
pub struct ClusterDraw {
    pub mu_star: f64,
    pub sigma_star: f64,
    pub tau: f64,
    pub beta: Vec<f64>,
}

/// One retained draw.
#[derive(Debug, Clone)]
pub struct DrawRecord {
    pub labels: Vec<u32>,
    pub clusters: Vec<ClusterDraw>,
    pub mu0: f64,
    pub sigma0: f64,
    pub log_post: f64,
}

impl DrawRecord {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }
}

/// Thinned posterior draws plus the accumulated co-clustering proportions.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub m: usize,
    pub p: usize,
    pub draws: Vec<DrawRecord>,
    /// row-major m x m proportion of retained draws in which two
    /// observations share a cluster
    pub coclustering: Vec<f64>,
    pub acceptance: AcceptanceStats,
}

impl PosteriorSamples {
    fn new(m: usize, p: usize) -> Self {
        Self {
            m,
            p,
            draws: Vec::new(),
            coclustering: vec![0.0; m * m],
            acceptance: AcceptanceStats::default(),
        }
    }

    fn record(&mut self, state: &ChainState, log_post: f64) {
        let labels: Vec<u32> = state
            .part
            .partition()
            .labels()
            .iter()
            .map(|&c| c as u32)
            .collect();
        let clusters = state
            .params
            .iter()
            .map(|th| ClusterDraw {
                mu_star: th.mu_star,
                sigma_star: th.sigma_star,
                tau: th.tau,
                beta: th.beta.clone(),
            })
            .collect();
        for j in 0..state.part.k() {
            let members = state.part.members(j);
            for (a, &ia) in members.iter().enumerate() {
                for &ib in &members[a..] {
                    self.coclustering[ia * self.m + ib] += 1.0;
                    if ia != ib {
                        self.coclustering[ib * self.m + ia] += 1.0;
                    }
                }
            }
        }
        self.draws.push(DrawRecord {
            labels,
            clusters,
            mu0: state.baseline.mu0,
            sigma0: state.baseline.sigma0,
            log_post,
        });
    }

    fn finalize(&mut self, acceptance: AcceptanceStats) {
        let n = self.draws.len().max(1) as f64;
        for v in &mut self.coclustering {
            *v /= n;
        }
        self.acceptance = acceptance;
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    /// Median of the per-draw cluster counts.
    pub fn median_k(&self) -> f64 {
        let mut ks: Vec<usize> = self.draws.iter().map(|d| d.k()).collect();
        ks.sort_unstable();
        let n = ks.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            ks[n / 2] as f64
        } else {
            (ks[n / 2 - 1] + ks[n / 2]) as f64 / 2.0
        }
    }
}

/// Run one chain to completion. Draws are deterministic in the seed.
pub fn run_chain(ds: &Dataset, model: &ModelConfig, cfg: &McmcConfig) -> Result<PosteriorSamples> {
    model.validate(ds.n_cols())?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState::init(ds, model, cfg, &mut rng)?;
    let mut acc = AcceptanceStats::default();
    let mut samples = PosteriorSamples::new(ds.n_rows(), ds.n_cols());
    for iter in 0..cfg.n_iter {
        state.scan(ds, model, cfg, &mut rng, &mut acc)?;
        debug_assert!(
            state.part.consistent_with(ds, 1e-7),
            "incremental statistics diverged from recomputation at iteration {iter}"
        );
        if iter >= cfg.n_burn && (iter - cfg.n_burn + 1) % cfg.thin == 0 {
            let lp = state.log_posterior(ds, model);
            if !lp.is_finite() {
                return Err(Error::NonFinite(format!(
                    "log posterior at iteration {iter}: k={}, baseline=({}, {}), sigma*={:?}",
                    state.k(),
                    state.baseline.mu0,
                    state.baseline.sigma0,
                    state
                        .params
                        .iter()
                        .map(|t| t.sigma_star)
                        .collect::<Vec<_>>()
                )));
            }
            samples.record(&state, lp);
        }
    }
    samples.finalize(acc);
    Ok(samples)
}

/// Evaluate a member sum of observation log densities against explicit
/// plug-ins, or the flat fast path when `plugins` is `None`.
pub(crate) fn members_loglik(
    ds: &Dataset,
    members: &[usize],
    skip: Option<usize>,
    extra: Option<usize>,
    theta: &ClusterParams,
    plugins: Option<&[PluginCell]>,
) -> f64 {
    let mut total = 0.0;
    match plugins {
        Some(pl) => {
            for &i in members {
                if Some(i) == skip {
                    continue;
                }
                total += obs_loglik(ds, i, theta, pl);
            }
            if let Some(i) = extra {
                total += obs_loglik(ds, i, theta, pl);
            }
        }
        None => {
            let var = theta.sigma_star * theta.sigma_star;
            for &i in members {
                if Some(i) == skip {
                    continue;
                }
                total += normal_logpdf(ds.y(i), theta.mu_star, var);
            }
            if let Some(i) = extra {
                total += normal_logpdf(ds.y(i), theta.mu_star, var);
            }
        }
    }
    total
}
