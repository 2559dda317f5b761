//! Fast local-linearity screen: complete-case model-based clustering of the
//! joint response/covariate vectors, per-cluster least squares, and a
//! size-weighted summary of the chosen linearity measure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Drop every row with a missing covariate; returns the reduced dataset and
/// the retained row indices.
pub fn complete_cases(ds: &Dataset) -> Result<(Dataset, Vec<usize>)> {
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| ds.pattern(i).len() == ds.n_cols())
        .collect();
    if keep.is_empty() {
        return Err(Error::NoCompleteCases);
    }
    Ok((ds.subset(&keep)?, keep))
}

/// Options for the mixture fit.
#[derive(Debug, Clone)]
pub struct GmmOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub n_restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 9,
            n_restarts: 10,
            max_iter: 300,
            tol: 1e-7,
            seed: 0,
        }
    }
}

/// A fitted full-covariance Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GmmModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub log_lik: f64,
    pub bic: f64,
    /// false when the winning restart stopped at the iteration cap
    pub converged: bool,
}

impl GmmModel {
    /// Hard assignments by maximum posterior responsibility; ties break to
    /// the lowest component index.
    pub fn assign(&self, data: &DMatrix<f64>) -> Vec<usize> {
        let chols: Vec<_> = self
            .covs
            .iter()
            .map(|c| nalgebra::Cholesky::new(c.clone()).expect("fitted covariance is SPD"))
            .collect();
        (0..data.nrows())
            .map(|i| {
                let x = data.row(i).transpose();
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for c in 0..self.k {
                    let v = self.weights[c].ln() + log_gauss(&x, &self.means[c], &chols[c]);
                    if v > best_val {
                        best_val = v;
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

fn log_gauss(x: &DVector<f64>, mean: &DVector<f64>, chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let d = x.len() as f64;
    let diff = x - mean;
    let solved = chol.l().solve_lower_triangular(&diff).expect("triangular solve");
    let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (d * crate::likelihood::LN_2PI + logdet + solved.norm_squared())
}

fn n_params(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

struct EmFit {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    log_lik: f64,
    converged: bool,
}

/// Fit mixtures over the configured component range with multiple restarts
/// each and return the best model by BIC.
pub fn gmm_fit_bic(data: &DMatrix<f64>, opts: &GmmOptions) -> Result<GmmModel> {
    let n = data.nrows();
    let d = data.ncols();
    if n <= d + 1 {
        return Err(Error::InvalidArgument(format!(
            "mixture fit needs more rows than dimensions, got {n} x {d}"
        )));
    }
    if opts.k_min == 0 || opts.k_min > opts.k_max {
        return Err(Error::InvalidConfig("bad component range".into()));
    }
    let k_max = opts.k_max.min(n / 2).max(opts.k_min);
    let mut best: Option<GmmModel> = None;
    for k in opts.k_min..=k_max {
        // restarts are independent and deterministic in (seed, k, restart)
        let fits: Vec<Option<EmFit>> = (0..opts.n_restarts)
            .into_par_iter()
            .map(|r| {
                let seed = opts
                    .seed
                    .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    .wrapping_add((k * 1000 + r) as u64);
                em_once(data, k, seed, opts.max_iter, opts.tol)
            })
            .collect();
        let mut k_best: Option<EmFit> = None;
        for fit in fits.into_iter().flatten() {
            if k_best.as_ref().map_or(true, |b| fit.log_lik > b.log_lik) {
                k_best = Some(fit);
            }
        }
        let Some(fit) = k_best else { continue };
        let bic = -2.0 * fit.log_lik + n_params(k, d) as f64 * (n as f64).ln();
        if best.as_ref().map_or(true, |b| bic < b.bic) {
            best = Some(GmmModel {
                k,
                weights: fit.weights,
                means: fit.means,
                covs: fit.covs,
                log_lik: fit.log_lik,
                bic,
                converged: fit.converged,
            });
        }
    }
    best.ok_or_else(|| Error::Internal("every mixture restart failed".into()))
}

fn em_once(data: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize, tol: f64) -> Option<EmFit> {
    let n = data.nrows();
    let d = data.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // global covariance for initialization and the ridge scale
    let grand_mean = DVector::from_fn(d, |l, _| data.column(l).mean());
    let mut global_cov = DMatrix::zeros(d, d);
    for i in 0..n {
        let diff = data.row(i).transpose() - &grand_mean;
        global_cov += &diff * diff.transpose();
    }
    global_cov /= n as f64;
    let ridge0 = 1e-6 * global_cov.trace() / d as f64 + 1e-12;
    for l in 0..d {
        global_cov[(l, l)] += ridge0;
    }

    let mut weights = vec![1.0 / k as f64; k];
    let mut means: Vec<DVector<f64>> = {
        let mut idx: Vec<usize> = (0..n).collect();
        for t in (1..n).rev() {
            let s = rng.random_range(0..=t);
            idx.swap(t, s);
        }
        idx[..k].iter().map(|&i| data.row(i).transpose()).collect()
    };
    let mut covs = vec![global_cov.clone(); k];

    let mut resp = DMatrix::zeros(n, k);
    let mut log_lik = f64::NEG_INFINITY;
    let mut converged = false;
    for _iter in 0..max_iter {
        // E step
        let chols: Vec<_> = covs
            .iter()
            .map(|c| nalgebra::Cholesky::new(c.clone()))
            .collect();
        if chols.iter().any(|c| c.is_none()) {
            return None;
        }
        let chols: Vec<_> = chols.into_iter().map(|c| c.unwrap()).collect();
        let mut new_ll = 0.0;
        for i in 0..n {
            let x = data.row(i).transpose();
            let mut lw = vec![0.0; k];
            for c in 0..k {
                lw[c] = weights[c].max(1e-300).ln() + log_gauss(&x, &means[c], &chols[c]);
            }
            let lse = crate::prior::log_sum_exp(&lw);
            new_ll += lse;
            for c in 0..k {
                resp[(i, c)] = (lw[c] - lse).exp();
            }
        }
        // M step
        for c in 0..k {
            let rsum: f64 = resp.column(c).sum();
            if rsum < 1e-10 {
                return None; // component starved
            }
            weights[c] = rsum / n as f64;
            let mut mu = DVector::zeros(d);
            for i in 0..n {
                mu += data.row(i).transpose() * resp[(i, c)];
            }
            mu /= rsum;
            let mut cov = DMatrix::zeros(d, d);
            for i in 0..n {
                let diff = data.row(i).transpose() - &mu;
                cov += &diff * diff.transpose() * resp[(i, c)];
            }
            cov /= rsum;
            let ridge = 1e-6 * cov.trace() / d as f64 + 1e-12;
            for l in 0..d {
                cov[(l, l)] += ridge;
            }
            means[c] = mu;
            covs[c] = cov;
        }
        if (new_ll - log_lik).abs() < tol * (1.0 + new_ll.abs()) {
            log_lik = new_ll;
            converged = true;
            break;
        }
        log_lik = new_ll;
    }
    Some(EmFit {
        weights,
        means,
        covs,
        log_lik,
        converged,
    })
}

/// Linearity measure summarized across clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearityMeasure {
    PValue,
    R2,
    AdjR2,
}

/// Least-squares summary of one eligible cluster.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClusterFit {
    pub cluster: usize,
    pub size: usize,
    /// intercept first, then one coefficient per covariate
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_pvalue: f64,
}

/// Full screening output.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScreenReport {
    pub m_complete: usize,
    pub k: usize,
    pub gmm_converged: bool,
    pub cluster_sizes: Vec<usize>,
    /// clusters large enough for a stable regression fit
    pub fits: Vec<ClusterFit>,
    pub q_pvalue: Option<f64>,
    pub q_r2: Option<f64>,
    pub q_adj_r2: Option<f64>,
}

impl ScreenReport {
    pub fn q_star(&self, measure: LinearityMeasure) -> Option<f64> {
        match measure {
            LinearityMeasure::PValue => self.q_pvalue,
            LinearityMeasure::R2 => self.q_r2,
            LinearityMeasure::AdjR2 => self.q_adj_r2,
        }
    }
}

/// Run the whole screen: drop incomplete rows, cluster the joint
/// response/covariate vectors, regress within the large clusters, and
/// combine the per-cluster measures weighted by cluster size.
pub fn screen_dataset(ds: &Dataset, opts: &GmmOptions) -> Result<ScreenReport> {
    let (cc, _) = complete_cases(ds)?;
    let m = cc.n_rows();
    let p = cc.n_cols();
    let d = p + 1;
    if m <= d + 1 {
        return Err(Error::InvalidArgument(format!(
            "only {m} complete cases for dimension {d}"
        )));
    }
    let data = DMatrix::from_fn(m, d, |i, c| {
        if c == 0 {
            cc.y(i)
        } else {
            cc.x(i, c - 1)
        }
    });
    let model = gmm_fit_bic(&data, opts)?;
    let labels = model.assign(&data);
    let mut sizes = vec![0usize; model.k];
    for &c in &labels {
        sizes[c] += 1;
    }

    let mut fits = Vec::new();
    for c in 0..model.k {
        let size = sizes[c];
        if size <= p + 2 {
            continue;
        }
        let rows: Vec<usize> = (0..m).filter(|&i| labels[i] == c).collect();
        let y: Vec<f64> = rows.iter().map(|&i| cc.y(i)).collect();
        let x = DMatrix::from_fn(rows.len(), p + 1, |r, col| {
            if col == 0 {
                1.0
            } else {
                cc.x(rows[r], col - 1)
            }
        });
        if let Some(fit) = ols_cluster(c, &y, &x, p) {
            fits.push(fit);
        }
    }

    let weighted = |pick: &dyn Fn(&ClusterFit) -> f64| -> Option<f64> {
        if fits.is_empty() {
            return None;
        }
        let wsum: f64 = fits.iter().map(|f| f.size as f64).sum();
        Some(fits.iter().map(|f| f.size as f64 * pick(f)).sum::<f64>() / wsum)
    };
    Ok(ScreenReport {
        m_complete: m,
        k: model.k,
        gmm_converged: model.converged,
        cluster_sizes: sizes,
        q_pvalue: weighted(&|f| f.f_pvalue),
        q_r2: weighted(&|f| f.r2),
        q_adj_r2: weighted(&|f| f.adj_r2),
        fits,
    })
}

/// Size-weighted linearity indicator for one measure; `None` when no cluster
/// is large enough to fit.
pub fn linearity_indicator(
    ds: &Dataset,
    measure: LinearityMeasure,
    opts: &GmmOptions,
) -> Result<(Option<f64>, ScreenReport)> {
    let report = screen_dataset(ds, opts)?;
    Ok((report.q_star(measure), report))
}

fn ols_cluster(cluster: usize, y: &[f64], x: &DMatrix<f64>, p: usize) -> Option<ClusterFit> {
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let coef = svd.solve(&yv, 1e-12).ok()?;
    let fitted = x * &coef;
    let ybar = yv.mean();
    let sse: f64 = (&yv - &fitted).norm_squared();
    let sst: f64 = yv.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let (r2, f_pvalue) = if sst <= 1e-300 {
        (0.0, 1.0)
    } else {
        let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
        let df1 = p as f64;
        let df2 = (n - p - 1) as f64;
        let pv = if df2 <= 0.0 {
            1.0
        } else if 1.0 - r2 <= 1e-14 {
            0.0
        } else {
            let f = (r2 / df1) / ((1.0 - r2) / df2);
            FisherSnedecor::new(df1, df2).map(|d| d.sf(f)).unwrap_or(1.0)
        };
        (r2, pv)
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64);
    Some(ClusterFit {
        cluster,
        size: n,
        coefficients: coef.iter().cloned().collect(),
        r2,
        adj_r2,
        f_pvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use approx::assert_relative_eq;

    fn ds_with_missing() -> Dataset {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let x = vec![0.1, 0.2, 0.0, 0.4, 0.5, 0.6, 0.7, 0.8];
        let mask = vec![true, true, false, true, true, true, true, true];
        Dataset::from_parts(y, x, mask, vec!["a".into(), "b".into()], "y").unwrap()
    }

    #[test]
    fn complete_cases_drops_rows_with_missing() {
        let ds = ds_with_missing();
        let (cc, idx) = complete_cases(&ds).unwrap();
        assert_eq!(cc.n_rows(), 3);
        assert_eq!(idx, vec![0, 2, 3]);
        // count matches an independent mask scan
        let scan = (0..ds.n_rows())
            .filter(|&i| (0..ds.n_cols()).all(|l| ds.is_observed(i, l)))
            .count();
        assert_eq!(cc.n_rows(), scan);
    }

    #[test]
    fn complete_cases_identity_when_nothing_missing() {
        let y = vec![1.0, 2.0];
        let x = vec![0.1, 0.2];
        let ds = Dataset::from_parts(y, x, vec![true, true], vec!["a".into()], "y").unwrap();
        let (cc, idx) = complete_cases(&ds).unwrap();
        assert_eq!(cc.n_rows(), 2);
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        // y = 1 + 2 x1 - 0.5 x2 + small noise
        let xs = [
            [0.2, 1.0],
            [0.9, -0.4],
            [-1.2, 0.3],
            [0.5, 0.5],
            [1.5, -1.0],
            [-0.3, 0.8],
            [2.0, 0.1],
            [0.0, -0.6],
        ];
        let noise = [0.01, -0.02, 0.015, 0.0, -0.01, 0.02, -0.005, 0.01];
        let y: Vec<f64> = xs
            .iter()
            .zip(noise)
            .map(|(x, e)| 1.0 + 2.0 * x[0] - 0.5 * x[1] + e)
            .collect();
        let design = DMatrix::from_fn(8, 3, |i, c| if c == 0 { 1.0 } else { xs[i][c - 1] });
        let fit = ols_cluster(0, &y, &design, 2).unwrap();
        // naive normal equations
        let xt = design.transpose();
        let beta = (xt.clone() * &design).try_inverse().unwrap()
            * xt
            * DVector::from_column_slice(&y);
        for (a, b) in fit.coefficients.iter().zip(beta.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
        assert!(fit.r2 > 0.99);
    }

    #[test]
    fn perfect_linear_fit_gives_r2_one_and_zero_pvalue() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 5.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let design = DMatrix::from_fn(20, 2, |i, c| if c == 0 { 1.0 } else { x[i] });
        let fit = ols_cluster(0, &y, &design, 1).unwrap();
        assert_relative_eq!(fit.r2, 1.0, epsilon = 1e-10);
        assert!(fit.f_pvalue < 1e-10);
    }

    #[test]
    fn adjusted_r2_formula_and_ordering() {
        let n = 12.0;
        let p = 3.0;
        let r2 = 0.6;
        let adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - p);
        assert!(adj <= r2);
        assert_relative_eq!(adj, 1.0 - 0.4 * 11.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_indicator_hand_value() {
        // sizes (10, 30) with measures (0.2, 0.6) combine to 0.5
        let fits = [
            (10usize, 0.2f64),
            (30, 0.6),
        ];
        let wsum: f64 = fits.iter().map(|f| f.0 as f64).sum();
        let q: f64 = fits.iter().map(|f| f.0 as f64 * f.1).sum::<f64>() / wsum;
        assert_relative_eq!(q, 0.5, epsilon = 1e-12);
    }
}
