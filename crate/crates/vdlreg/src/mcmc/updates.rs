//! Per-cluster and baseline parameter updates.

use rand::Rng;

use crate::config::{McmcConfig, ModelConfig, TauKernel};
use crate::data::{Dataset, PartitionState};
use crate::error::Result;
use crate::gig::{gig_sample, invgauss_sample};
use crate::likelihood::{normal_logpdf, Baseline, ClusterParams};
use crate::samplers::{ess_step, slice_sample};

use super::ChainState;

const PHI_FLOOR: f64 = 1e-150;
const BETA_FLOOR: f64 = 1e-10;

/// Per-member residual mean shift and variance inflation under the current
/// coefficients; the zero-coefficient case reduces to `(0, 0)` without
/// touching the plug-ins.
fn member_terms(
    ds: &Dataset,
    part: &PartitionState,
    j: usize,
    theta: &ClusterParams,
) -> (Vec<f64>, Vec<f64>) {
    let members = part.members(j);
    let plugins = part.plugins_ref(j);
    let mut shift = Vec::with_capacity(members.len());
    let mut inflation = Vec::with_capacity(members.len());
    for &i in members {
        let mut s = 0.0;
        for &l in ds.pattern(i) {
            let b = theta.beta[l];
            if b != 0.0 {
                s += b * plugins[l].standardize(ds.x(i, l));
            }
        }
        let mut v = 0.0;
        for &l in ds.missing_pattern(i) {
            let b = theta.beta[l];
            if b != 0.0 {
                v += b * b;
            }
        }
        shift.push(s);
        inflation.push(v);
    }
    (shift, inflation)
}

/// Conjugate draw of a cluster mean given residuals with observation-specific
/// variances.
pub fn update_mu_star<R: Rng>(
    rng: &mut R,
    ds: &Dataset,
    part: &mut PartitionState,
    theta: &mut ClusterParams,
    j: usize,
    baseline: &Baseline,
    _model: &ModelConfig,
    _cfg: &McmcConfig,
) {
    part.refresh_plugins(j);
    let (shift, inflation) = member_terms(ds, part, j, theta);
    let members = part.members(j);
    let sigma2 = theta.sigma_star * theta.sigma_star;
    let prior_prec = 1.0 / (baseline.sigma0 * baseline.sigma0);
    let mut prec = prior_prec;
    let mut wsum = baseline.mu0 * prior_prec;
    for (idx, &i) in members.iter().enumerate() {
        let v = sigma2 + inflation[idx];
        let resid = ds.y(i) - shift[idx];
        prec += 1.0 / v;
        wsum += resid / v;
    }
    let mean = wsum / prec;
    let sd = prec.sqrt().recip();
    let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
    theta.mu_star = mean + sd * z;
}

/// Slice update of a cluster error scale on its bounded support. In the
/// linear model the conditional includes the coefficient-prior factor, whose
/// covariance is scaled by this parameter.
pub fn update_sigma_star<R: Rng>(
    rng: &mut R,
    ds: &Dataset,
    part: &mut PartitionState,
    theta: &mut ClusterParams,
    j: usize,
    model: &ModelConfig,
    cfg: &McmcConfig,
) {
    part.refresh_plugins(j);
    let (shift, inflation) = member_terms(ds, part, j, theta);
    let members = part.members(j);
    let ys: Vec<f64> = members.iter().map(|&i| ds.y(i)).collect();
    let a_sigma = model.a_sigma;
    let p = theta.p() as f64;
    let linear = model.linear() && theta.p() > 0;
    // sum of beta^2 / (psi phi^2), the scale-free part of the coefficient
    // prior's quadratic form
    let mut s_beta = 0.0;
    if linear {
        for l in 0..theta.p() {
            let b = theta.beta[l];
            if b != 0.0 {
                let phi = theta.phi[l].max(PHI_FLOOR);
                s_beta += b * b / (theta.psi[l] * phi * phi);
            }
        }
    }
    let tau2 = theta.tau * theta.tau;
    let mu = theta.mu_star;
    let target = |sigma: f64| {
        if sigma <= 0.0 || sigma >= a_sigma {
            return f64::NEG_INFINITY;
        }
        let s2 = sigma * sigma;
        let mut lp = 0.0;
        if linear {
            lp += -p * sigma.ln() - s_beta / (2.0 * s2 * tau2);
        }
        for idx in 0..ys.len() {
            lp += normal_logpdf(ys[idx], mu + shift[idx], s2 + inflation[idx]);
        }
        lp
    };
    theta.sigma_star = slice_sample(rng, theta.sigma_star, target, &cfg.slice);
}

/// Elliptical slice update of the cluster coefficients under their Gaussian
/// prior.
pub fn update_beta_star<R: Rng>(
    rng: &mut R,
    ds: &Dataset,
    part: &mut PartitionState,
    theta: &mut ClusterParams,
    j: usize,
    _model: &ModelConfig,
    cfg: &McmcConfig,
) {
    part.refresh_plugins(j);
    let p = theta.p();
    let members: Vec<usize> = part.members(j).to_vec();
    let plugins = part.plugins_ref(j);
    // standardized covariates are fixed during this update
    let mut zs = vec![0.0; members.len() * p];
    for (idx, &i) in members.iter().enumerate() {
        for &l in ds.pattern(i) {
            zs[idx * p + l] = plugins[l].standardize(ds.x(i, l));
        }
    }
    let ys: Vec<f64> = members.iter().map(|&i| ds.y(i)).collect();
    let sigma2 = theta.sigma_star * theta.sigma_star;
    let mu = theta.mu_star;
    let prior_sd: Vec<f64> = (0..p)
        .map(|l| theta.sigma_star * theta.tau * theta.psi[l].sqrt() * theta.phi[l].max(PHI_FLOOR))
        .collect();
    let log_lik = |beta: &[f64]| {
        let mut lp = 0.0;
        for (idx, &i) in members.iter().enumerate() {
            let mut mean = mu;
            for &l in ds.pattern(i) {
                mean += beta[l] * zs[idx * p + l];
            }
            let mut var = sigma2;
            for &l in ds.missing_pattern(i) {
                var += beta[l] * beta[l];
            }
            lp += normal_logpdf(ys[idx], mean, var);
        }
        lp
    };
    theta.beta = ess_step(rng, &theta.beta, &prior_sd, log_lik, cfg.ess_max_shrink);
}

/// Blocked update of the shrinkage augmentation: the allocation weights and
/// global scale move jointly through independent GIG draws (the scale can
/// instead take a slice step against its exact conditional), then the local
/// scales are refreshed from their reciprocal inverse-Gaussian conditionals.
pub fn update_dl_hypers<R: Rng>(
    rng: &mut R,
    theta: &mut ClusterParams,
    model: &ModelConfig,
    cfg: &McmcConfig,
) -> Result<()> {
    let p = theta.p();
    if p == 0 {
        return Ok(());
    }
    let tau0 = model.tau0;
    let babs: Vec<f64> = theta
        .beta
        .iter()
        .map(|b| (b / theta.sigma_star).abs().max(BETA_FLOOR))
        .collect();

    // joint draw of the allocation weights and the global scale through
    // independent GIG variables; the normalized pieces give the weights and
    // their total is an exact draw of the scale given those weights
    let lam = 1.0 / p as f64 - 1.0;
    let mut total = 0.0;
    let mut t = vec![0.0; p];
    for l in 0..p {
        t[l] = gig_sample(rng, lam, 1.0 / tau0, 2.0 * babs[l])?;
        total += t[l];
    }
    if p == 1 {
        theta.phi[0] = 1.0;
    } else {
        let mut phi_sum = 0.0;
        for l in 0..p {
            theta.phi[l] = (t[l] / total).max(PHI_FLOOR);
            phi_sum += theta.phi[l];
        }
        for l in 0..p {
            theta.phi[l] /= phi_sum;
        }
    }
    theta.tau = total;
    if cfg.tau_kernel == TauKernel::Slice {
        // extra slice transition against the scale's exact conditional given
        // the fresh weights; started from an exact draw, it stays exact
        let r: f64 = (0..p).map(|l| babs[l] / theta.phi[l]).sum();
        slice_tau(rng, theta, tau0, r, cfg);
    }

    for l in 0..p {
        let mean = (theta.phi[l] * theta.tau / babs[l]).clamp(1e-300, 1e300);
        let y = invgauss_sample(rng, mean, 1.0)?;
        theta.psi[l] = (1.0 / y).clamp(1e-300, 1e300);
    }
    Ok(())
}

// Slice step for the global scale on the log scale, targeting its exact
// conditional with the local scales marginalized: a GIG(1 - p, 1/tau0, 2r)
// density.
fn slice_tau<R: Rng>(rng: &mut R, theta: &mut ClusterParams, tau0: f64, r: f64, cfg: &McmcConfig) {
    let p = theta.p() as f64;
    let target = |u: f64| {
        if !(-700.0..=700.0).contains(&u) {
            return f64::NEG_INFINITY;
        }
        let tau = u.exp();
        (1.0 - p) * u - 0.5 * (tau / tau0 + 2.0 * r / tau)
    };
    let u = slice_sample(rng, theta.tau.ln(), target, &cfg.slice);
    theta.tau = u.exp();
}

/// Conjugate update of the baseline location and a slice update of the
/// baseline scale on its bounded support.
pub fn update_baseline<R: Rng>(
    rng: &mut R,
    state: &mut ChainState,
    model: &ModelConfig,
    cfg: &McmcConfig,
) {
    let k = state.k();
    let sum_mu: f64 = state.params.iter().map(|t| t.mu_star).sum();
    let s0sq = state.baseline.sigma0 * state.baseline.sigma0;
    let v2 = model.v * model.v;
    let prec = 1.0 / v2 + k as f64 / s0sq;
    let mean = (model.m0 / v2 + sum_mu / s0sq) / prec;
    let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
    state.baseline.mu0 = mean + prec.sqrt().recip() * z;

    let mu0 = state.baseline.mu0;
    let mus: Vec<f64> = state.params.iter().map(|t| t.mu_star).collect();
    let a = model.a_sigma0;
    let target = |s: f64| {
        if s <= 0.0 || s >= a {
            return f64::NEG_INFINITY;
        }
        let s2 = s * s;
        mus.iter().map(|&m| normal_logpdf(m, mu0, s2)).sum()
    };
    state.baseline.sigma0 = slice_sample(rng, state.baseline.sigma0, target, &cfg.slice);
}
