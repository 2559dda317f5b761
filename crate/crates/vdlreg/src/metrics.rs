//! Comparison metrics: mean squared prediction error, predictive deviance,
//! and the Kolmogorov-Smirnov statistic for uniformity of quantile residuals.

use crate::error::{Error, Result};

/// Mean squared prediction error.
pub fn mspe(y_true: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y_true.len() != y_hat.len() || y_true.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "mspe needs equal nonempty lengths, got {} and {}",
            y_true.len(),
            y_hat.len()
        )));
    }
    let n = y_true.len() as f64;
    Ok(y_true
        .iter()
        .zip(y_hat)
        .map(|(t, h)| (t - h) * (t - h))
        .sum::<f64>()
        / n)
}

/// Predictive deviance from per-point, per-draw log density evaluations:
/// minus twice the mean over points of the mean over draws.
pub fn predictive_deviance(loglik_draws: &[Vec<f64>]) -> Result<f64> {
    if loglik_draws.is_empty() || loglik_draws.iter().any(|d| d.is_empty()) {
        return Err(Error::InvalidArgument(
            "deviance needs at least one draw per point".into(),
        ));
    }
    let per_point: Vec<f64> = loglik_draws
        .iter()
        .map(|d| d.iter().sum::<f64>() / d.len() as f64)
        .collect();
    Ok(deviance_from_mean_logliks(&per_point).unwrap())
}

/// Deviance when the per-point posterior-mean log densities are already
/// averaged.
pub fn deviance_from_mean_logliks(mean_logliks: &[f64]) -> Result<f64> {
    if mean_logliks.is_empty() {
        return Err(Error::InvalidArgument("deviance of an empty set".into()));
    }
    Ok(-2.0 * mean_logliks.iter().sum::<f64>() / mean_logliks.len() as f64)
}

/// Kolmogorov-Smirnov statistic against the uniform distribution on [0, 1].
pub fn ks_uniform(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::InvalidArgument("empty quantile-residual set".into()));
    }
    if q.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument(
            "quantile residuals must lie in [0, 1]".into(),
        ));
    }
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - v;
        let lo = v - i as f64 / n;
        d = d.max(hi.max(lo));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mspe_examples() {
        assert_eq!(mspe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(mspe(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(mspe(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mspe_matches_naive_two_pass() {
        let y = [0.3, -1.2, 4.5, 0.0, 2.2];
        let h = [0.1, -1.0, 4.0, 0.4, 2.0];
        let naive: f64 = {
            let diffs: Vec<f64> = y.iter().zip(&h).map(|(a, b)| a - b).collect();
            diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64
        };
        assert_relative_eq!(mspe(&y, &h).unwrap(), naive, epsilon = 1e-12);
    }

    #[test]
    fn deviance_single_point() {
        // constant log density of a standard normal at zero
        let ll = -0.5 * (2.0 * std::f64::consts::PI).ln();
        let d = predictive_deviance(&[vec![ll, ll, ll]]).unwrap();
        assert_relative_eq!(d, 1.8379, epsilon = 1e-4);
    }

    #[test]
    fn deviance_invariant_to_duplicated_points_and_draw_order() {
        let a = vec![-1.2, -0.8, -1.0];
        let b = vec![-2.0, -1.5, -2.5];
        let d1 = predictive_deviance(&[a.clone(), b.clone()]).unwrap();
        let d2 = predictive_deviance(&[a.clone(), b.clone(), a.clone(), b.clone()]).unwrap();
        assert_relative_eq!(d1, d2, epsilon = 1e-12);
        let mut b_perm = b.clone();
        b_perm.reverse();
        let d3 = predictive_deviance(&[a, b_perm]).unwrap();
        assert_eq!(d1.to_bits(), d3.to_bits());
    }

    #[test]
    fn ks_examples() {
        assert_relative_eq!(ks_uniform(&[0.5]).unwrap(), 0.5);
        let n = 20;
        let grid: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        assert_relative_eq!(ks_uniform(&grid).unwrap(), 1.0 / (2.0 * n as f64), epsilon = 1e-12);
        assert_relative_eq!(ks_uniform(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn ks_rejects_out_of_range() {
        assert!(ks_uniform(&[0.5, 1.2]).is_err());
        assert!(ks_uniform(&[]).is_err());
    }

    #[test]
    fn ks_is_permutation_invariant_and_bounded() {
        let q = [0.9, 0.2, 0.4, 0.7, 0.01];
        let mut q2 = q;
        q2.reverse();
        assert_eq!(
            ks_uniform(&q).unwrap().to_bits(),
            ks_uniform(&q2).unwrap().to_bits()
        );
        let v = ks_uniform(&q).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}
