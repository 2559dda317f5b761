//! Quadrature oracles for the closed-form marginals, the projection
//! identities, and the predictive mixture.

mod common;

use common::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vdlreg::data::{CellStats, Dataset, PartitionState, PluginPriors};
use vdlreg::likelihood::{dl_logprior, ClusterParams};
use vdlreg::predict::{predictive_mean, predictive_mixture, PredictiveMixture};
use vdlreg::prior::{co_cluster_probability, log_cohesion, SimilarityParams};
use vdlreg::{ModelConfig, Similarity};

fn random_values<R: Rng>(rng: &mut R, max_n: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_n);
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

#[test]
fn nn_marginal_matches_quadrature_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        let values = random_values(&mut rng, 4);
        let prior_mean = rng.random_range(-1.0..1.0);
        let prior_var = rng.random_range(0.2..9.0);
        let kernel_var = rng.random_range(0.1..2.0);
        let sim = SimilarityParams::Nn {
            prior_mean,
            prior_var,
            kernel_var,
        };
        let closed = sim.log_marginal_values(&values).unwrap();
        let quad = nn_log_marginal_quadrature(&values, prior_mean, prior_var, kernel_var);
        assert!(
            (closed - quad).abs() < 1e-6,
            "NN closed {closed} vs quadrature {quad} on {values:?}"
        );
    }
}

#[test]
fn nnig_and_nnsichi2_marginals_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..15 {
        let values = random_values(&mut rng, 4);
        let prior_mean = rng.random_range(-1.0..1.0);
        let kappa = rng.random_range(0.05..2.0);
        let shape = rng.random_range(1.5..4.0);
        let scale = rng.random_range(0.5..4.0);
        let sim = SimilarityParams::Nnig {
            prior_mean,
            kappa,
            shape,
            scale,
        };
        let closed = sim.log_marginal_values(&values).unwrap();
        let quad = nig_log_marginal_quadrature(&values, prior_mean, kappa, shape, scale);
        assert!(
            (closed - quad).abs() < 1e-6,
            "NNIG closed {closed} vs quadrature {quad} on {values:?}"
        );

        let df = rng.random_range(2.0..10.0);
        let s0sq = rng.random_range(0.01..0.3);
        let sim = SimilarityParams::NnsiChi2 {
            prior_mean,
            kappa,
            df,
            scale_sq: s0sq,
        };
        let closed = sim.log_marginal_values(&values).unwrap();
        let quad =
            nig_log_marginal_quadrature(&values, prior_mean, kappa, 0.5 * df, 0.5 * df * s0sq);
        assert!(
            (closed - quad).abs() < 1e-6,
            "NNSIX2 closed {closed} vs quadrature {quad} on {values:?}"
        );
    }
}

#[test]
fn projection_identity_integrating_a_new_value_recovers_the_base_marginal() {
    let fams = [
        SimilarityParams::Nn {
            prior_mean: 0.0,
            prior_var: 4.0,
            kernel_var: 1.0,
        },
        SimilarityParams::Nnig {
            prior_mean: 0.0,
            kappa: 0.1,
            shape: 2.5,
            scale: 2.5,
        },
        SimilarityParams::nnsichi2_default(),
    ];
    let cells = [vec![], vec![0.4], vec![-0.8, 1.2, 0.1]];
    for sim in fams {
        for values in &cells {
            let base = sim.log_marginal_values(values).unwrap();
            let log_f = |x: f64| {
                let mut all = values.clone();
                all.push(x);
                sim.log_marginal_values(&all).unwrap()
            };
            let integrated = log_integral(&log_f, -80.0, 80.0);
            assert!(
                (integrated - base).abs() < 1e-5,
                "{sim:?} on {values:?}: integrated {integrated} vs base {base}"
            );
        }
    }
}

#[test]
fn cocluster_missing_covariate_equals_integrated_weight() {
    // masking the second covariate of the second observation matches the
    // quadrature integral of the joint weight over that covariate's value
    let sim = Similarity::shared(SimilarityParams::Nn {
        prior_mean: 0.0,
        prior_var: 25.0,
        kernel_var: 1.0,
    });
    let x1 = [0.0, 0.0];
    let obs_all = [true, true];
    let x2_first = 0.7;

    // unnormalized together-weight as a function of the second observation's
    // second covariate
    let nn = SimilarityParams::Nn {
        prior_mean: 0.0,
        prior_var: 25.0,
        kernel_var: 1.0,
    };
    let lw_together = |x22: Option<f64>| -> f64 {
        let mut lw = log_cohesion(2, 1.0);
        lw += nn
            .log_marginal(&CellStats::from_values(&[x1[0], x2_first]));
        match x22 {
            Some(v) => lw += nn.log_marginal(&CellStats::from_values(&[x1[1], v])),
            None => lw += nn.log_marginal(&CellStats::from_values(&[x1[1]])),
        }
        lw
    };
    let masked = lw_together(None);
    let integrated = log_integral(&|v: f64| lw_together(Some(v)), -90.0, 90.0);
    assert!(
        (integrated - masked).abs() < 1e-5,
        "integrated {integrated} vs masked {masked}"
    );

    // and the probability built from the masked weights stays a probability
    let p_masked = co_cluster_probability(
        &[x1[0], x2_first],
        &obs_all,
        &[0.0, 0.0],
        &[true, false],
        1.0,
        &sim,
    )
    .unwrap();
    assert!(p_masked > 0.0 && p_masked < 1.0);
}

#[test]
fn partition_prior_of_three_points_matches_quadrature() {
    let y = vec![0.0, 0.0, 0.0];
    let x = vec![0.3, -0.9, 1.4];
    let ds = Dataset::from_parts(y, x, vec![true; 3], vec!["a".into()], "y").unwrap();
    let sim = SimilarityParams::Nn {
        prior_mean: 0.0,
        prior_var: 4.0,
        kernel_var: 0.7,
    };
    let similarity = Similarity::shared(sim);
    let labelings: [&[usize]; 5] = [
        &[0, 0, 0],
        &[0, 0, 1],
        &[0, 1, 0],
        &[0, 1, 1],
        &[0, 1, 2],
    ];
    for labels in labelings {
        let st = PartitionState::from_labels(&ds, labels, PluginPriors::default()).unwrap();
        let closed = vdlreg::prior::log_partition_prior(&st, 1.3, &similarity);
        // quadrature route: per cluster, integrate the latent location
        let mut quad = 0.0;
        let k = labels.iter().max().unwrap() + 1;
        for j in 0..k {
            let members: Vec<f64> = (0..3)
                .filter(|&i| labels[i] == j)
                .map(|i| ds.x(i, 0))
                .collect();
            quad += log_cohesion(members.len(), 1.3);
            quad += nn_log_marginal_quadrature(&members, 0.0, 4.0, 0.7);
        }
        assert!(
            (closed - quad).abs() < 1e-6,
            "labels {labels:?}: closed {closed} vs quadrature {quad}"
        );
    }
}

#[test]
fn dl_gaussian_factor_integrates_to_one() {
    // with the augmentation fixed, the coefficient factor is a proper density
    let theta = |b: f64| ClusterParams {
        mu_star: 0.0,
        sigma_star: 0.8,
        beta: vec![b],
        psi: vec![1.7],
        phi: vec![1.0],
        tau: 0.4,
    };
    let tau0 = 0.2;
    let hyper_terms = {
        let t0 = theta(0.0);
        let full = dl_logprior(&t0, tau0).unwrap();
        let sd = 0.8 * 0.4 * 1.7f64.sqrt();
        full - normal_logpdf(0.0, 0.0, sd * sd)
    };
    let log_f = |b: f64| dl_logprior(&theta(b), tau0).unwrap() - hyper_terms;
    let total = log_integral(&log_f, -60.0, 60.0);
    assert!(total.abs() < 1e-6, "integral of the beta factor: {total}");
}

#[test]
fn predictive_mixture_normalizes_and_mean_matches_first_moment() {
    let y = vec![0.1, -0.3, 1.2, 0.8, 0.4];
    let x = vec![0.0, 0.2, 1.0, 0.9, 0.5];
    let ds = Dataset::from_parts(y, x, vec![true; 5], vec!["a".into()], "y").unwrap();
    let model = ModelConfig::default();
    let mut st = PartitionState::from_labels(&ds, &[0, 0, 1, 1, 1], model.plugin).unwrap();
    let params = vec![
        ClusterParams {
            mu_star: 0.0,
            sigma_star: 0.6,
            beta: vec![0.4],
            psi: vec![1.0],
            phi: vec![1.0],
            tau: 0.2,
        },
        ClusterParams {
            mu_star: 1.0,
            sigma_star: 0.4,
            beta: vec![-0.2],
            psi: vec![1.0],
            phi: vec![1.0],
            tau: 0.2,
        },
    ];
    let theta_new = ClusterParams {
        mu_star: 0.3,
        sigma_star: 1.0,
        beta: vec![0.1],
        psi: vec![1.0],
        phi: vec![1.0],
        tau: 0.2,
    };
    for mask in [[true], [false]] {
        let mix = predictive_mixture(&[0.4], &mask, &mut st, &params, &theta_new, &model, false);
        let wsum: f64 = mix.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-12, "weights sum {wsum}");
        let total = adaptive_simpson_panels(&|v: f64| mix.density(v), -40.0, 40.0, 1e-9, 64);
        assert!((total - 1.0).abs() < 1e-6, "density integral {total}");
        let first = adaptive_simpson_panels(&|v: f64| v * mix.density(v), -40.0, 40.0, 1e-10, 64);
        assert!(
            (first - predictive_mean(&mix)).abs() < 1e-8,
            "first moment {first} vs mean {}",
            predictive_mean(&mix)
        );
    }
}

#[test]
fn mixture_masking_matches_componentwise_marginalization() {
    // masking one covariate shifts each component mean by dropping its term
    // and inflates the variance by the squared coefficient, exactly
    let y = vec![0.1, -0.3, 1.2];
    let x = vec![0.0, 0.2, 1.0, -0.5, 0.7, 0.3];
    let ds = Dataset::from_parts(
        y,
        x,
        vec![true; 6],
        vec!["a".into(), "b".into()],
        "y",
    )
    .unwrap();
    let model = ModelConfig::default();
    let mut st = PartitionState::from_labels(&ds, &[0, 0, 1], model.plugin).unwrap();
    let params = vec![
        ClusterParams {
            mu_star: 0.2,
            sigma_star: 0.5,
            beta: vec![0.7, -0.4],
            psi: vec![1.0, 1.0],
            phi: vec![0.5, 0.5],
            tau: 0.2,
        },
        ClusterParams {
            mu_star: -1.0,
            sigma_star: 0.9,
            beta: vec![0.1, 0.9],
            psi: vec![1.0, 1.0],
            phi: vec![0.5, 0.5],
            tau: 0.2,
        },
    ];
    let theta_new = ClusterParams::flat(2, 0.0, 1.0, 0.1);
    let q = [0.4, -0.2];
    let full: PredictiveMixture =
        predictive_mixture(&q, &[true, true], &mut st, &params, &theta_new, &model, false);
    let masked: PredictiveMixture =
        predictive_mixture(&q, &[true, false], &mut st, &params, &theta_new, &model, false);
    for h in 0..st.k() {
        let plugins = {
            st.refresh_plugins(h);
            st.plugins_ref(h).to_vec()
        };
        let z2 = (q[1] - plugins[1].mean) / plugins[1].var.sqrt();
        let expect_mean = full.means[h] - params[h].beta[1] * z2;
        let expect_var = full.vars[h] + params[h].beta[1] * params[h].beta[1];
        assert!((masked.means[h] - expect_mean).abs() < 1e-12);
        assert!((masked.vars[h] - expect_var).abs() < 1e-12);
    }
}
