//! Univariate slice sampling (doubling plus shrinkage) and elliptical slice
//! sampling for parameters with Gaussian priors.

use rand::Rng;
use rand_distr::Distribution;

/// Interval construction for the univariate slice sampler.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SliceConfig {
    pub width: f64,
    pub max_doublings: u32,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_doublings: 20,
        }
    }
}

/// One slice-sampling transition targeting `ln f`. The target may return
/// negative infinity outside its support; `x0` must have finite target value.
pub fn slice_sample<R: Rng, F: FnMut(f64) -> f64>(
    rng: &mut R,
    x0: f64,
    mut log_target: F,
    cfg: &SliceConfig,
) -> f64 {
    let f0 = log_target(x0);
    debug_assert!(f0.is_finite(), "slice sampler started outside support");
    let y = f0 + rng.random::<f64>().ln();

    // doubling
    let w = cfg.width.max(f64::MIN_POSITIVE);
    let mut l = x0 - w * rng.random::<f64>();
    let mut r = l + w;
    let mut fl = log_target(l);
    let mut fr = log_target(r);
    let mut k = cfg.max_doublings;
    while k > 0 && (y < fl || y < fr) {
        if rng.random::<bool>() {
            l -= r - l;
            fl = log_target(l);
        } else {
            r += r - l;
            fr = log_target(r);
        }
        k -= 1;
    }

    // shrinkage with the doubling acceptability check
    let mut lbar = l;
    let mut rbar = r;
    loop {
        let x1 = lbar + rng.random::<f64>() * (rbar - lbar);
        let f1 = log_target(x1);
        if y < f1 && accept_doubling(x0, x1, y, l, r, w, &mut log_target) {
            return x1;
        }
        if x1 < x0 {
            lbar = x1;
        } else {
            rbar = x1;
        }
        if rbar - lbar < f64::EPSILON * (1.0 + x0.abs()) {
            // the interval has collapsed onto the current point
            return x0;
        }
    }
}

// Neal's acceptance test for intervals found by doubling.
fn accept_doubling<F: FnMut(f64) -> f64>(
    x0: f64,
    x1: f64,
    y: f64,
    mut l: f64,
    mut r: f64,
    w: f64,
    log_target: &mut F,
) -> bool {
    let mut differ = false;
    while r - l > 1.1 * w {
        let m = 0.5 * (l + r);
        if (x0 < m && x1 >= m) || (x0 >= m && x1 < m) {
            differ = true;
        }
        if x1 < m {
            r = m;
        } else {
            l = m;
        }
        if differ && y >= log_target(l) && y >= log_target(r) {
            return false;
        }
    }
    true
}

/// One elliptical slice-sampling transition for a parameter with a centered
/// Gaussian prior (diagonal, with the given standard deviations) and an
/// arbitrary log likelihood. Always terminates: the bracket shrinks toward
/// the current state, whose likelihood exceeds the slice level.
pub fn ess_step<R: Rng, F: FnMut(&[f64]) -> f64>(
    rng: &mut R,
    current: &[f64],
    prior_sd: &[f64],
    mut log_lik: F,
    max_shrink: u32,
) -> Vec<f64> {
    let d = current.len();
    let mut nu = vec![0.0; d];
    for l in 0..d {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        nu[l] = prior_sd[l] * z;
    }
    let log_y = log_lik(current) + rng.random::<f64>().ln();
    let mut angle = rng.random::<f64>() * std::f64::consts::TAU;
    let (mut lo, mut hi) = (angle - std::f64::consts::TAU, angle);
    let mut proposal = vec![0.0; d];
    for _ in 0..max_shrink.max(1) {
        let (s, c) = angle.sin_cos();
        for l in 0..d {
            proposal[l] = current[l] * c + nu[l] * s;
        }
        if log_lik(&proposal) > log_y {
            return proposal;
        }
        if angle < 0.0 {
            lo = angle;
        } else {
            hi = angle;
        }
        angle = lo + rng.random::<f64>() * (hi - lo);
    }
    current.to_vec()
}
