//! Shared oracle machinery for the integration tests: numerical quadrature
//! independent of the closed forms under test, and distribution-comparison
//! helpers.
#![allow(dead_code)]

/// Adaptive Simpson integration with an absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fb, fm, whole, eps, 48)
}

/// Adaptive Simpson over an initial uniform panelization, so narrow features
/// away from the endpoints cannot be skipped by the first coarse estimate.
pub fn adaptive_simpson_panels<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    eps: f64,
    panels: usize,
) -> f64 {
    let step = (b - a) / panels as f64;
    let eps_panel = eps / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + step * i as f64;
            adaptive_simpson(f, lo, lo + step, eps_panel)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, fm, flm, left, eps * 0.5, depth - 1)
            + simpson_rec(f, m, b, fm, fb, frm, right, eps * 0.5, depth - 1)
    }
}

/// `ln` of the integral of `exp(log_f)` over `[a, b]`, stabilized against
/// under/overflow by factoring out the integrand's coarse maximum. The
/// adaptive pass focuses on the region carrying mass; the skipped flanks are
/// more than sixty log-units below the peak.
pub fn log_integral<F: Fn(f64) -> f64>(log_f: &F, a: f64, b: f64) -> f64 {
    let n = 600;
    let step = (b - a) / n as f64;
    let mut hmax = f64::NEG_INFINITY;
    let mut logs = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = a + step * i as f64;
        let v = log_f(t);
        logs.push(if v.is_nan() { f64::NEG_INFINITY } else { v });
        hmax = hmax.max(v);
    }
    if !hmax.is_finite() {
        return f64::NEG_INFINITY;
    }
    let cut = hmax - 60.0;
    let first = logs.iter().position(|&v| v > cut).unwrap();
    let last = logs.iter().rposition(|&v| v > cut).unwrap();
    let lo = a + step * (first.saturating_sub(1)) as f64;
    let hi = (a + step * (last + 1) as f64).min(b);
    let g = |t: f64| {
        let v = log_f(t) - hmax;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    };
    let eps = 1e-11 * (hi - lo).max(1.0);
    hmax + adaptive_simpson(&g, lo, hi, eps).ln()
}

const LN_2PI: f64 = 1.8378770664093453;

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Quadrature evaluation of the location-kernel similarity marginal: the
/// product of Gaussian kernels with known variance integrated against a
/// Gaussian prior on the location.
pub fn nn_log_marginal_quadrature(
    values: &[f64],
    prior_mean: f64,
    prior_var: f64,
    kernel_var: f64,
) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let spread = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let width = 14.0 * (prior_var.sqrt() + kernel_var.sqrt() + 1.0);
    let lo = spread.0.min(prior_mean) - width;
    let hi = spread.1.max(prior_mean) + width;
    let log_f = |t: f64| {
        let mut lp = normal_logpdf(t, prior_mean, prior_var);
        for &v in values {
            lp += normal_logpdf(v, t, kernel_var);
        }
        lp
    };
    log_integral(&log_f, lo, hi)
}

/// Quadrature evaluation of the location/scale similarity marginal: Gaussian
/// kernels with a Gaussian prior on the location (variance scaled by the
/// kernel variance) and an inverse-gamma prior on the kernel variance,
/// integrated over both latents. `a`, `b` parameterize the inverse gamma
/// with density proportional to `s^(-a-1) exp(-b/s)`.
pub fn nig_log_marginal_quadrature(
    values: &[f64],
    prior_mean: f64,
    kappa: f64,
    a: f64,
    b: f64,
) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    use statrs::function::gamma::ln_gamma;
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let center = (kappa * prior_mean + sum) / (kappa + n);
    let log_ig = |s2: f64| a * b.ln() - ln_gamma(a) - (a + 1.0) * s2.ln() - b / s2;
    let inner_log = |t: f64, s2: f64| {
        let mut lp = normal_logpdf(t, prior_mean, s2 / kappa);
        for &v in values {
            lp += normal_logpdf(v, t, s2);
        }
        lp
    };
    // Locate the region of the scale integral that carries mass with a cheap
    // Laplace proxy (the inner integrand is Gaussian in the location, so the
    // proxy is tight). Outside that region the log densities are so large in
    // magnitude that differencing them is pure rounding noise.
    let proxy = |u: f64| {
        let s2 = u.exp();
        log_ig(s2) + u + inner_log(center, s2) + 0.5 * (LN_2PI + (s2 / (kappa + n)).ln())
    };
    let u_center = (b / (a + 1.0)).ln();
    let (scan_lo, scan_hi) = (u_center - 45.0, u_center + 45.0);
    let n_scan = 2000;
    let step = (scan_hi - scan_lo) / n_scan as f64;
    let mut pvals = Vec::with_capacity(n_scan + 1);
    let mut pmax = f64::NEG_INFINITY;
    for i in 0..=n_scan {
        let v = proxy(scan_lo + step * i as f64);
        pvals.push(v);
        pmax = pmax.max(v);
    }
    let cut = pmax - 55.0;
    let first = pvals.iter().position(|&v| v > cut).unwrap();
    let last = pvals.iter().rposition(|&v| v > cut).unwrap();
    let u_lo = scan_lo + step * first.saturating_sub(1) as f64;
    let u_hi = (scan_lo + step * (last + 1) as f64).min(scan_hi);

    // real nested quadrature over the trimmed region
    let log_f = |u: f64| {
        let s2 = u.exp();
        let st = (s2 / (kappa + n)).sqrt();
        let peak = inner_log(center, s2);
        if !peak.is_finite() {
            return f64::NEG_INFINITY;
        }
        let g = |t: f64| (inner_log(t, s2) - peak).exp();
        let (lo, hi) = (center - 14.0 * st, center + 14.0 * st);
        let integral = adaptive_simpson_panels(&g, lo, hi, 3e-9 * (hi - lo), 8);
        log_ig(s2) + u + peak + integral.ln()
    };
    log_integral(&log_f, u_lo, u_hi)
}

/// Kolmogorov-Smirnov statistic of a sample against an arbitrary CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = cdf(x);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// CDF built by normalizing a log density on a grid; for slice/grid oracles.
pub struct GridCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridCdf {
    pub fn from_log_density<F: Fn(f64) -> f64>(log_f: F, lo: f64, hi: f64, n: usize) -> Self {
        let xs: Vec<f64> = (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect();
        let logs: Vec<f64> = xs.iter().map(|&x| log_f(x)).collect();
        let hmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|&l| (l - hmax).exp()).collect();
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let total = *cdf.last().unwrap();
        for v in &mut cdf {
            *v /= total;
        }
        Self { xs, cdf }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let idx = self.xs.partition_point(|&v| v < x);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }
}

/// Mean and batch-means standard error of a (possibly autocorrelated) chain.
pub fn batch_mean_se(chain: &[f64], n_batches: usize) -> (f64, f64) {
    let n = chain.len();
    let mean = chain.iter().sum::<f64>() / n as f64;
    let bsize = n / n_batches;
    let mut bmeans = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let lo = b * bsize;
        let hi = lo + bsize;
        bmeans.push(chain[lo..hi].iter().sum::<f64>() / bsize as f64);
    }
    let bvar = bmeans.iter().map(|&m| (m - mean) * (m - mean)).sum::<f64>()
        / (n_batches as f64 - 1.0);
    (mean, (bvar / n_batches as f64).sqrt())
}

/// Mean and standard error of independent draws.
pub fn iid_mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample z-score combining an iid reference with a correlated chain.
pub fn geweke_z(forward: &[f64], chain: &[f64], n_batches: usize) -> f64 {
    let (m1, se1) = iid_mean_se(forward);
    let (m2, se2) = batch_mean_se(chain, n_batches);
    (m1 - m2) / (se1 * se1 + se2 * se2).sqrt()
}
