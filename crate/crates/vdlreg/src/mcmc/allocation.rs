//! Cluster-allocation updates.
//!
//! The default kernel Metropolizes each observation's move with proposals
//! built from cohesion and similarity weights only, so sampling densities are
//! evaluated for just the two clusters involved in a proposal. Every product
//! of observation densities is evaluated under the hypothesized membership,
//! with plug-ins recomputed for the cluster gaining or losing the
//! observation; those densities do not cancel between numerator and
//! denominator. A full-conditional kernel over all clusters is retained as a
//! correctness cross-check for small samples.

use rand::Rng;

use crate::config::{AllocationKernel, McmcConfig, ModelConfig};
use crate::data::{CellStats, Dataset, PartitionState, PluginCell};
use crate::error::Result;
use crate::likelihood::{obs_loglik, Baseline, ClusterParams};
use crate::prior::{log_sum_exp, Similarity};

use super::{members_loglik, AcceptanceStats, ChainState};

/// Run one allocation sweep over a fresh random permutation of the
/// observations. `draw_theta` supplies parameters for proposed new clusters.
pub fn update_allocations<R, F>(
    state: &mut ChainState,
    ds: &Dataset,
    model: &ModelConfig,
    cfg: &McmcConfig,
    rng: &mut R,
    acc: &mut AcceptanceStats,
    draw_theta: &mut F,
) -> Result<()>
where
    R: Rng,
    F: FnMut(&mut R, &Baseline) -> ClusterParams,
{
    let m = ds.n_rows();
    let mut order: Vec<usize> = (0..m).collect();
    for t in (1..m).rev() {
        let s = rng.random_range(0..=t);
        order.swap(t, s);
    }
    let flat_fast = ChainState::flat_fast(model, cfg);
    let mut scratch = Scratch::new(ds.n_cols());
    for &i in &order {
        match cfg.allocation_kernel {
            AllocationKernel::Mh => {
                mh_move(state, ds, model, cfg, rng, acc, draw_theta, i, flat_fast, &mut scratch)
            }
            AllocationKernel::Gibbs => {
                gibbs_move(state, ds, model, rng, draw_theta, i, flat_fast, &mut scratch)
            }
        }
    }
    Ok(())
}

struct Scratch {
    lw: Vec<f64>,
    cells: Vec<CellStats>,
    plugins: Vec<PluginCell>,
}

impl Scratch {
    fn new(p: usize) -> Self {
        Self {
            lw: Vec::new(),
            cells: vec![CellStats::default(); p],
            plugins: vec![PluginCell { mean: 0.0, var: 1.0 }; p],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn mh_move<R, F>(
    state: &mut ChainState,
    ds: &Dataset,
    model: &ModelConfig,
    cfg: &McmcConfig,
    rng: &mut R,
    acc: &mut AcceptanceStats,
    draw_theta: &mut F,
    i: usize,
    flat_fast: bool,
    scratch: &mut Scratch,
) -> ()
where
    R: Rng,
    F: FnMut(&mut R, &Baseline) -> ClusterParams,
{
    let type1 = rng.random::<f64>() < cfg.prob_type1;
    let j_cur = state.part.label(i);
    let singleton = state.part.size(j_cur) == 1;
    let k = state.part.k();
    let sim = &model.similarity;

    if type1 && singleton {
        // singleton-to-group: propose joining an existing alternate cluster
        if k == 1 {
            return;
        }
        join_weights(&state.part, ds, sim, i, false, &mut scratch.lw);
        scratch.lw[j_cur] = f64::NEG_INFINITY;
        let lse_a = log_sum_exp(&scratch.lw);
        let c_star = sample_categorical(rng, &scratch.lw, lse_a);

        let ll_target_with = ll_plus(state, ds, c_star, i, flat_fast, scratch);
        let ll_target_cur = ll_current(state, ds, c_star, flat_fast);
        let ll_own = ll_current(state, ds, j_cur, flat_fast);
        let lw_new = model.mass.ln() + log_single_row(sim, ds, i);
        let log_a = lse_a + ll_target_with - (lw_new + ll_own + ll_target_cur);
        acc.type1a_proposed += 1;
        if rng.random::<f64>().ln() < log_a.min(0.0) {
            acc.type1a_accepted += 1;
            move_obs(state, ds, i, MoveTarget::Existing(c_star));
        }
    } else if type1 {
        // group-to-singleton: propose a fresh cluster with new parameters
        let theta_new = draw_theta(rng, &state.baseline);
        join_weights(&state.part, ds, sim, i, true, &mut scratch.lw);
        let lse_b = log_sum_exp(&scratch.lw);

        let priors = *state.part.priors();
        let ll_i_new = ll_own_singleton(ds, i, &theta_new, &priors, flat_fast, scratch);
        let ll_cur_minus = ll_minus(state, ds, j_cur, i, flat_fast, scratch);
        let ll_cur_full = ll_current(state, ds, j_cur, flat_fast);
        let lw_new = model.mass.ln() + log_single_row(sim, ds, i);
        let log_a = lw_new + ll_i_new + ll_cur_minus - (lse_b + ll_cur_full);
        acc.type1b_proposed += 1;
        if rng.random::<f64>().ln() < log_a.min(0.0) {
            acc.type1b_accepted += 1;
            move_obs(state, ds, i, MoveTarget::New(theta_new));
        }
    } else if !singleton {
        // move between occupied clusters
        if k == 1 {
            return;
        }
        join_weights(&state.part, ds, sim, i, true, &mut scratch.lw);
        let lse_not_cur = log_sum_exp_excluding(&scratch.lw, j_cur);
        let saved = scratch.lw[j_cur];
        scratch.lw[j_cur] = f64::NEG_INFINITY;
        let c_star = sample_categorical(rng, &scratch.lw, lse_not_cur);
        scratch.lw[j_cur] = saved;
        let log_a = type2_log_accept_given(state, ds, i, c_star, flat_fast, scratch);
        acc.type2_proposed += 1;
        if rng.random::<f64>().ln() < log_a.min(0.0) {
            acc.type2_accepted += 1;
            move_obs(state, ds, i, MoveTarget::Existing(c_star));
        }
    }
    // type 2 with a singleton does nothing
}

// Log acceptance ratio of the occupied-to-occupied move, with the join
// weights already in the scratch buffer.
fn type2_log_accept_given(
    state: &mut ChainState,
    ds: &Dataset,
    i: usize,
    c_star: usize,
    flat_fast: bool,
    scratch: &mut Scratch,
) -> f64 {
    let j_cur = state.part.label(i);
    let lse_not_cur = log_sum_exp_excluding(&scratch.lw, j_cur);
    let lse_not_star = log_sum_exp_excluding(&scratch.lw, c_star);
    let ll_star_with = ll_plus(state, ds, c_star, i, flat_fast, scratch);
    let ll_star_cur = ll_current(state, ds, c_star, flat_fast);
    let ll_cur_minus = ll_minus(state, ds, j_cur, i, flat_fast, scratch);
    let ll_cur_full = ll_current(state, ds, j_cur, flat_fast);
    lse_not_cur + ll_star_with + ll_cur_minus - (lse_not_star + ll_star_cur + ll_cur_full)
}

/// Log acceptance ratio of a hypothetical occupied-to-occupied move of
/// observation `i` into cluster `c_star`; a diagnostic surface for
/// correctness checks.
pub fn type2_log_acceptance(
    state: &mut ChainState,
    ds: &Dataset,
    model: &ModelConfig,
    cfg: &McmcConfig,
    i: usize,
    c_star: usize,
) -> f64 {
    let flat_fast = ChainState::flat_fast(model, cfg);
    let mut scratch = Scratch::new(ds.n_cols());
    join_weights(&state.part, ds, &model.similarity, i, true, &mut scratch.lw);
    type2_log_accept_given(state, ds, i, c_star, flat_fast, &mut scratch)
}

#[allow(clippy::too_many_arguments)]
fn gibbs_move<R, F>(
    state: &mut ChainState,
    ds: &Dataset,
    model: &ModelConfig,
    rng: &mut R,
    draw_theta: &mut F,
    i: usize,
    flat_fast: bool,
    scratch: &mut Scratch,
) -> ()
where
    R: Rng,
    F: FnMut(&mut R, &Baseline) -> ClusterParams,
{
    let j_cur = state.part.label(i);
    let was_singleton = state.part.size(j_cur) == 1;
    let k = state.part.k();
    let sim = &model.similarity;
    let theta_aux = if was_singleton {
        state.params[j_cur].clone()
    } else {
        draw_theta(rng, &state.baseline)
    };

    // candidate log weights: existing clusters (own cluster via its
    // minus-one statistics), then the new-cluster slot
    join_weights(&state.part, ds, sim, i, true, &mut scratch.lw);
    let mut weights = Vec::with_capacity(k + 1);
    for h in 0..k {
        if h == j_cur {
            if was_singleton {
                weights.push(f64::NEG_INFINITY); // the emptied cluster is not a candidate
            } else {
                let with_i = ll_current(state, ds, h, flat_fast);
                let without_i = ll_minus(state, ds, h, i, flat_fast, scratch);
                weights.push(scratch.lw[h] + with_i - without_i);
            }
        } else {
            let with_i = ll_plus(state, ds, h, i, flat_fast, scratch);
            let without_i = ll_current(state, ds, h, flat_fast);
            weights.push(scratch.lw[h] + with_i - without_i);
        }
    }
    let priors = *state.part.priors();
    let lw_new = model.mass.ln()
        + log_single_row(sim, ds, i)
        + ll_own_singleton(ds, i, &theta_aux, &priors, flat_fast, scratch);
    weights.push(lw_new);

    let lse = log_sum_exp(&weights);
    let choice = sample_categorical(rng, &weights, lse);
    if choice == k {
        if was_singleton {
            // staying a singleton keeps the auxiliary (current) parameters
            return;
        }
        move_obs(state, ds, i, MoveTarget::New(theta_aux));
    } else if choice != j_cur {
        move_obs(state, ds, i, MoveTarget::Existing(choice));
    }
}

enum MoveTarget {
    Existing(usize),
    New(ClusterParams),
}

fn move_obs(state: &mut ChainState, ds: &Dataset, i: usize, target: MoveTarget) {
    use crate::data::MoveEffect;
    let (idx, theta) = match target {
        MoveTarget::Existing(h) => (h, None),
        MoveTarget::New(theta) => (state.part.k(), Some(theta)),
    };
    let effect = state.part.apply_move(ds, i, idx);
    match effect {
        MoveEffect::None => {}
        MoveEffect::Moved => {}
        MoveEffect::Created => state.params.push(theta.expect("new cluster parameters")),
        MoveEffect::RemovedCompacted { slot } => {
            state.params.swap_remove(slot);
        }
        MoveEffect::CreatedRemoved { slot } => {
            state.params.push(theta.expect("new cluster parameters"));
            state.params.swap_remove(slot);
        }
    }
    debug_assert_eq!(state.params.len(), state.part.k());
}

/// Log join weights for observation `i` against every cluster: the cohesion
/// ratio times the similarity ratios over the observation's observed
/// covariates. With `exclude_own`, the observation's current cluster is
/// weighted through its leave-one-out statistics.
fn join_weights(
    part: &PartitionState,
    ds: &Dataset,
    sim: &Similarity,
    i: usize,
    exclude_own: bool,
    out: &mut Vec<f64>,
) {
    let k = part.k();
    let j_cur = part.label(i);
    out.clear();
    for h in 0..k {
        let own = h == j_cur;
        let size_eff = if own && exclude_own {
            part.size(h) - 1
        } else {
            part.size(h)
        };
        if size_eff == 0 {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let mut lw = (size_eff as f64).ln();
        for &l in ds.pattern(i) {
            let x = ds.x(i, l);
            let cell = if own && exclude_own {
                part.cell(h, l).without(x)
            } else {
                *part.cell(h, l)
            };
            lw += sim.for_col(l).log_ratio(&cell, x);
        }
        out.push(lw);
    }
}

fn log_single_row(sim: &Similarity, ds: &Dataset, i: usize) -> f64 {
    ds.pattern(i)
        .iter()
        .map(|&l| {
            sim.for_col(l)
                .log_marginal(&CellStats::default().with(ds.x(i, l)))
        })
        .sum()
}

fn log_sum_exp_excluding(lw: &[f64], skip: usize) -> f64 {
    let mx = lw
        .iter()
        .enumerate()
        .filter(|&(h, _)| h != skip)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let sum: f64 = lw
        .iter()
        .enumerate()
        .filter(|&(h, _)| h != skip)
        .map(|(_, &v)| (v - mx).exp())
        .sum();
    mx + sum.ln()
}

fn sample_categorical<R: Rng>(rng: &mut R, log_w: &[f64], lse: f64) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_finite = 0;
    for (idx, &lw) in log_w.iter().enumerate() {
        if lw.is_finite() {
            last_finite = idx;
            cum += (lw - lse).exp();
            if u < cum {
                return idx;
            }
        }
    }
    last_finite
}

/// Member-sum log density of cluster `j` in its current configuration.
fn ll_current(state: &mut ChainState, ds: &Dataset, j: usize, flat_fast: bool) -> f64 {
    if flat_fast {
        members_loglik(ds, state.part.members(j), None, None, &state.params[j], None)
    } else {
        state.part.refresh_plugins(j);
        members_loglik(
            ds,
            state.part.members(j),
            None,
            None,
            &state.params[j],
            Some(state.part.plugins_ref(j)),
        )
    }
}

/// Member-sum log density of cluster `j` as if `i` had joined it.
fn ll_plus(
    state: &ChainState,
    ds: &Dataset,
    j: usize,
    i: usize,
    flat_fast: bool,
    scratch: &mut Scratch,
) -> f64 {
    if flat_fast {
        return members_loglik(ds, state.part.members(j), None, Some(i), &state.params[j], None);
    }
    hypothetical_plugins(state, ds, j, i, true, scratch);
    members_loglik(
        ds,
        state.part.members(j),
        None,
        Some(i),
        &state.params[j],
        Some(&scratch.plugins),
    )
}

/// Member-sum log density of cluster `j` as if `i` had left it.
fn ll_minus(
    state: &ChainState,
    ds: &Dataset,
    j: usize,
    i: usize,
    flat_fast: bool,
    scratch: &mut Scratch,
) -> f64 {
    if flat_fast {
        return members_loglik(ds, state.part.members(j), Some(i), None, &state.params[j], None);
    }
    hypothetical_plugins(state, ds, j, i, false, scratch);
    members_loglik(
        ds,
        state.part.members(j),
        Some(i),
        None,
        &state.params[j],
        Some(&scratch.plugins),
    )
}

/// Log density of observation `i` alone in a new cluster with parameters
/// `theta`; the plug-ins come from the singleton's own covariates.
fn ll_own_singleton(
    ds: &Dataset,
    i: usize,
    theta: &ClusterParams,
    priors: &crate::data::PluginPriors,
    flat_fast: bool,
    scratch: &mut Scratch,
) -> f64 {
    if flat_fast {
        return members_loglik(ds, &[], None, Some(i), theta, None);
    }
    for l in 0..ds.n_cols() {
        scratch.cells[l] = CellStats::default();
    }
    for &l in ds.pattern(i) {
        scratch.cells[l].add(ds.x(i, l));
    }
    for l in 0..ds.n_cols() {
        scratch.plugins[l] = crate::data::plugin_stats(&scratch.cells[l], priors);
    }
    obs_loglik(ds, i, theta, &scratch.plugins)
}

fn hypothetical_plugins(
    state: &ChainState,
    ds: &Dataset,
    j: usize,
    i: usize,
    add: bool,
    scratch: &mut Scratch,
) {
    let priors = *state.part.priors();
    let mask = ds.mask_row(i);
    for l in 0..ds.n_cols() {
        let cell = if mask[l] {
            let x = ds.x(i, l);
            if add {
                state.part.cell(j, l).with(x)
            } else {
                state.part.cell(j, l).without(x)
            }
        } else {
            *state.part.cell(j, l)
        };
        scratch.plugins[l] = crate::data::plugin_stats(&cell, &priors);
    }
}
