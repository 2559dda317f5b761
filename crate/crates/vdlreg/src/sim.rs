//! Synthetic data generators and missingness amputation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

fn col_names(p: usize) -> Vec<String> {
    (1..=p).map(|l| format!("x{l}")).collect()
}

/// Nonlinear benchmark regression with ten uniform covariates, half of them
/// noise. The heteroscedastic variant scales the noise variance by
/// `exp(x1)`.
pub fn friedman(m: usize, heteroscedastic: bool, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one row".into()));
    }
    let p = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; m * p];
    for v in &mut x {
        *v = rng.random::<f64>();
    }
    let mut y = vec![0.0; m];
    for i in 0..m {
        let r = &x[i * p..(i + 1) * p];
        let f = friedman_mean(r);
        let sd = if heteroscedastic {
            (r[0].exp()).sqrt()
        } else {
            1.0
        };
        let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        y[i] = f + sd * z;
    }
    Dataset::from_parts(y, x, vec![true; m * p], col_names(p), "y")
}

/// The noiseless regression surface used by [`friedman`].
pub fn friedman_mean(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.5) * (x[2] - 0.5)
        + 10.0 * x[3]
        + 5.0 * x[4]
}

// Re-mask a dataset: entries selected by `select(i, l, x_std)` become
// missing. Columns that end up fully missing are resampled once; a second
// failure is an error.
fn ampute_with<F: FnMut(&mut ChaCha8Rng, usize, usize) -> bool>(
    ds: &Dataset,
    seed: u64,
    mut select: F,
) -> Result<Dataset> {
    let m = ds.n_rows();
    let p = ds.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; m * p];
    let mut mask = vec![false; m * p];
    for i in 0..m {
        for l in 0..p {
            if ds.is_observed(i, l) {
                x[i * p + l] = ds.x(i, l);
                mask[i * p + l] = !select(&mut rng, i, l);
            }
        }
    }
    for l in 0..p {
        if (0..m).all(|i| !mask[i * p + l]) {
            // one resample pass for the degenerate column
            let mut any = false;
            for i in 0..m {
                if ds.is_observed(i, l) {
                    mask[i * p + l] = !select(&mut rng, i, l);
                    any |= mask[i * p + l];
                }
            }
            if !any {
                return Err(Error::DegenerateAmputation(ds.col_names()[l].clone()));
            }
        }
    }
    let y: Vec<f64> = (0..m).map(|i| ds.y(i)).collect();
    Dataset::from_parts(y, x, mask, ds.col_names().to_vec(), ds.response_name())
}

/// Mask each observed covariate entry independently with the given
/// probability; the response is never touched.
pub fn ampute_mcar(ds: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "missing rate must lie in [0, 1), got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(ds.clone());
    }
    ampute_with(ds, seed, |rng, _i, _l| rng.random::<f64>() < rate)
}

/// Value-dependent masking: entry `(i, l)` goes missing with probability
/// `logistic(alpha_l + steepness * z_il)` where `z` is the column-standardized
/// value and each column's intercept is calibrated by bisection so the
/// expected missing fraction matches `rate`.
pub fn ampute_mnar(ds: &Dataset, rate: f64, steepness: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) || rate == 0.0 && steepness != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "missing rate must lie in (0, 1) for value-dependent masking, got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(ds.clone());
    }
    let m = ds.n_rows();
    let p = ds.n_cols();
    // per-column standardized values over the observed entries
    let mut z = vec![0.0; m * p];
    for l in 0..p {
        let vals: Vec<f64> = (0..m)
            .filter(|&i| ds.is_observed(i, l))
            .map(|i| ds.x(i, l))
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
            .sqrt()
            .max(1e-12);
        for i in 0..m {
            if ds.is_observed(i, l) {
                z[i * p + l] = (ds.x(i, l) - mean) / sd;
            }
        }
    }
    // calibrate alpha per column: mean logistic(alpha + s z) = rate
    let logistic = |t: f64| 1.0 / (1.0 + (-t).exp());
    let mut alpha = vec![0.0; p];
    for l in 0..p {
        let zs: Vec<f64> = (0..m)
            .filter(|&i| ds.is_observed(i, l))
            .map(|i| z[i * p + l])
            .collect();
        let mean_prob = |a: f64| zs.iter().map(|&v| logistic(a + steepness * v)).sum::<f64>() / zs.len() as f64;
        let (mut lo, mut hi) = (-60.0, 60.0);
        if mean_prob(lo) > rate || mean_prob(hi) < rate {
            return Err(Error::RateCalibration(ds.col_names()[l].clone()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_prob(mid) < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        alpha[l] = 0.5 * (lo + hi);
    }
    ampute_with(ds, seed, |rng, i, l| {
        rng.random::<f64>() < logistic(alpha[l] + steepness * z[i * p + l])
    })
}

/// Benchmark data kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    /// four clusters with constant mean responses
    Step,
    /// four clusters whose means include covariates
    Linear,
}

/// Four-cluster benchmark data with 20% of covariate entries missing
/// completely at random. Cluster covariate means sit on a grid; step
/// responses are cluster constants plus unit noise, linear responses add
/// cluster-specific slopes on the first two covariates.
pub fn bench_data(kind: BenchKind, m: usize, p: usize, seed: u64) -> Result<Dataset> {
    if m < 4 || p == 0 {
        return Err(Error::InvalidArgument(
            "benchmark data needs at least four rows and one covariate".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [-3.0, -1.0, 1.0, 3.0];
    let mut x = vec![0.0; m * p];
    let mut y = vec![0.0; m];
    for i in 0..m {
        let g = i * 4 / m; // four contiguous, near-equal groups
        let c = centers[g];
        for l in 0..p {
            let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            x[i * p + l] = c + z;
        }
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let mean = match kind {
            BenchKind::Step => centers[g],
            BenchKind::Linear => {
                let mut v = centers[g];
                for l in 0..p.min(2) {
                    let slope = if (g + l) % 2 == 0 { 1.0 } else { -1.0 };
                    v += slope * (x[i * p + l] - c);
                }
                v
            }
        };
        y[i] = mean + noise;
    }
    let ds = Dataset::from_parts(y, x, vec![true; m * p], col_names(p), "y")?;
    ampute_mcar(&ds, 0.2, seed.wrapping_add(1))
}

/// The three screening test scenarios: four clusters cut from an equally
/// spaced first covariate, with cluster-specific quadratic/linear or
/// constant response rules.
pub fn screening_scenario(scenario: u8, seed: u64) -> Result<Dataset> {
    if !(1..=3).contains(&scenario) {
        return Err(Error::InvalidArgument(format!(
            "scenario must be 1, 2, or 3, got {scenario}"
        )));
    }
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
    let x2: Vec<f64> = (0..n).map(|_| -3.0 + 6.0 * rng.random::<f64>()).collect();
    let x3: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let cluster = |v: f64| -> usize {
        if v < -1.0 {
            0
        } else if v < 0.0 {
            1
        } else if v < 1.0 {
            2
        } else {
            3
        }
    };
    let mut y = vec![0.0; n];
    for i in 0..n {
        let g = cluster(x1[i]);
        let (mean, sd) = match scenario {
            1 => match g {
                0 => (1.0 + 10.0 * x1[i] * x1[i] + 0.5 * x2[i], 10.0),
                1 => (2.0 + 10.0 * x1[i] * x1[i] - x2[i], 6.0),
                2 => (-1.0 - 20.0 * x1[i] * x1[i] + 2.0 * x2[i], 10.0),
                _ => (-2.0 + 20.0 * x1[i] * x1[i] - 2.0 * x2[i], 8.0),
            },
            2 => match g {
                0 => (20.0, 10.0),
                1 => (-20.0, 6.0),
                2 => (30.0, 10.0),
                _ => (-30.0, 8.0),
            },
            _ => match g {
                0 => (1.0 + 10.0 * x2[i] * x2[i] + 0.5 * x3[i], 10.0),
                1 => (2.0 + 10.0 * x2[i] * x2[i] - x3[i], 8.0),
                2 => (-1.0 - 20.0 * x2[i] * x2[i] + 2.0 * x3[i], 10.0),
                _ => (-2.0 + 20.0 * x2[i] * x2[i] - 2.0 * x3[i], 8.0),
            },
        };
        let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        y[i] = mean + sd * z;
    }
    let mut x = vec![0.0; n * 3];
    for i in 0..n {
        x[i * 3] = x1[i];
        x[i * 3 + 1] = x2[i];
        x[i * 3 + 2] = x3[i];
    }
    Dataset::from_parts(y, x, vec![true; n * 3], col_names(3), "y")
}

/// Cluster labels of the screening scenarios, fixed by the first covariate's
/// grid.
pub fn screening_scenario_labels() -> Vec<usize> {
    let n = 200;
    (0..n)
        .map(|i| {
            let v = -2.0 + 4.0 * i as f64 / (n - 1) as f64;
            if v < -1.0 {
                0
            } else if v < 0.0 {
                1
            } else if v < 1.0 {
                2
            } else {
                3
            }
        })
        .collect()
}

/// Three-cluster illustration data: two unit-variance Gaussian covariates
/// with cluster-specific means, responses from the cluster-local linear
/// model, and a quarter of the covariate entries masked at random. Returns
/// the dataset and the generating labels.
pub fn illustration_data(seed: u64) -> Result<(Dataset, Vec<usize>)> {
    let m = 500;
    let p = 2;
    let means = [[0.0, 0.0], [-3.0, -1.5], [1.0, 3.0]];
    let mu = [1.5, 2.5, -5.0];
    let beta = [[-0.9, 2.0], [-0.3, -1.0], [0.7, 0.0]];
    let sigma = [1.2, 0.5, 0.8];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..m).map(|i| i % 3).collect();
    let mut x = vec![0.0; m * p];
    let mut y = vec![0.0; m];
    for i in 0..m {
        let g = labels[i];
        let mut mean = mu[g];
        for l in 0..p {
            let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            let v = means[g][l] + z;
            x[i * p + l] = v;
            mean += beta[g][l] * (v - means[g][l]);
        }
        let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        y[i] = mean + sigma[g] * z;
    }
    let ds = Dataset::from_parts(y, x, vec![true; m * p], col_names(p), "y")?;
    let ds = ampute_mcar(&ds, 0.25, seed.wrapping_add(1))?;
    Ok((ds, labels))
}
