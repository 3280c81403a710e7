//! Cross-module detector properties: real/complex path equivalence, the
//! likelihood oracle identity, rank structure and baseline orderings on
//! simulated data.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pla_core::channel::{CsiMeasurement, OfdmConfig, PowerDelayProfile, ScenarioConfig};
use pla_core::data::gen_sim_dataset;
use pla_core::detector::{
    build_noise_blind_np, build_np, log_likelihood_oracle, np_statistic, np_statistic_real,
    pearson_statistic, realify_matrix, realify_vector, NpCoefficients, PearsonMode,
    RealCoefficients,
};
use pla_core::linalg;
use pla_core::metrics::auc_from_scores;
use pla_core::rng;
use pla_core::stats::ChannelStatistics;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_csi<R: Rng>(n: usize, rng: &mut R) -> CsiMeasurement {
    CsiMeasurement::from_vec(
        (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect(),
    )
}

fn model_stats(m: usize, l: usize, alpha: f64, beta: f64, theta: f64, nv: f64) -> ChannelStatistics {
    let pdp = PowerDelayProfile::exponential(l, 1.0).unwrap();
    let config = OfdmConfig::fully_active(m, 0.125).unwrap();
    ChannelStatistics::from_model(&pdp, &config, alpha, beta, theta, nv).unwrap()
}

#[test]
fn complex_and_real_statistics_agree() {
    let stats = model_stats(8, 2, 0.9, 0.2, 1.0, 0.1);
    let coeffs = build_np(&stats).unwrap();
    let real = RealCoefficients::from_complex(&coeffs);
    let mut r = rng::from_seed(3001);
    for _ in 0..1000 {
        let h0 = random_csi(8, &mut r);
        let h1 = random_csi(8, &mut r);
        let complex_path = np_statistic(&h0, &h1, &coeffs).unwrap();
        let real_path =
            np_statistic_real(&realify_vector(&h0), &realify_vector(&h1), &real).unwrap();
        let tol = 1e-10 * complex_path.abs().max(real_path.abs()).max(1e-9);
        assert!(
            (complex_path - real_path).abs() <= tol,
            "complex {complex_path} vs real {real_path}"
        );
    }
}

#[test]
fn oracle_identity_on_random_small_instances() {
    let mut r = rng::from_seed(3002);
    for trial in 0..100 {
        let m = 1 + trial % 8;
        let l = 1 + trial % m.min(3);
        let alpha = 0.5 + 0.4 * (trial as f64 / 100.0);
        let beta = 0.1 + 0.3 * ((trial % 7) as f64 / 7.0);
        let theta = [1.0, 2.0, 0.5][trial % 3];
        let nv = [0.05, 0.2, 0.6][trial % 3];
        let stats = model_stats(m, l, alpha, beta, theta, nv);
        let coeffs = build_np(&stats).unwrap();
        let offset = {
            let ba = linalg::cholesky_named(stats.sigma_ba(), "sigma_ba").unwrap();
            let ma = linalg::cholesky_named(stats.sigma_ma(), "sigma_ma").unwrap();
            linalg::ln_det(&ba) - linalg::ln_det(&ma)
        };
        let h0 = random_csi(m, &mut r);
        let h1 = random_csi(m, &mut r);
        let lambda = np_statistic(&h0, &h1, &coeffs).unwrap();
        let oracle = log_likelihood_oracle(&h0, &h1, &stats).unwrap() + offset;
        assert!(
            (lambda - oracle).abs() <= 1e-9 * lambda.abs().max(oracle.abs()).max(1e-6),
            "trial {trial}: statistic {lambda} vs oracle {oracle}"
        );
    }
}

#[test]
fn rank_structure_of_coefficients() {
    // moderate size; the acceptance suite runs the full 52-subcarrier case
    let m = 16;
    let l = 3;
    let stats = model_stats(m, l, 0.9, 0.3, 1.0, 0.1);
    let coeffs = build_np(&stats).unwrap();

    assert_eq!(linalg::numerical_rank_complex(stats.sigma_h(), 1e-8), l);
    let rank_b = linalg::numerical_rank_complex(coeffs.b(), 1e-8);
    let rank_c = linalg::numerical_rank_complex(coeffs.c(), 1e-8);
    assert!(rank_b <= l, "rank(B) = {rank_b}");
    assert!(rank_c <= l, "rank(C) = {rank_c}");

    let rank_b_real = linalg::numerical_rank_real(&realify_matrix(coeffs.b()), 1e-8);
    let rank_c_real = linalg::numerical_rank_real(&realify_matrix(coeffs.c()), 1e-8);
    assert_eq!(rank_b_real, 2 * rank_b);
    assert_eq!(rank_c_real, 2 * rank_c);
}

fn score_dataset_np(
    dataset: &pla_core::data::PairDataset,
    coeffs: &NpCoefficients,
) -> Vec<(f64, bool)> {
    dataset
        .samples
        .iter()
        .map(|s| (np_statistic(&s.h_k, &s.h_k1, coeffs).unwrap(), s.label))
        .collect()
}

#[test]
fn noise_blind_detector_degrades_under_noise() {
    // 6 dB measurement noise on a 2-tap profile
    let pdp = PowerDelayProfile::exponential(2, 1.0).unwrap();
    let config = OfdmConfig::fully_active(8, 0.125).unwrap();
    let scenario = ScenarioConfig {
        snr_db: 6.0,
        attacker_distance_m: 0.125,
        ..ScenarioConfig::default()
    };
    let stats = ChannelStatistics::from_model(
        &pdp,
        &config,
        scenario.alpha(),
        scenario.beta(config.carrier_wavelength()),
        scenario.power_ratio,
        pla_core::channel::snr_to_noise_var(scenario.snr_db, &pdp),
    )
    .unwrap();
    let np = build_np(&stats).unwrap();
    let blind = build_noise_blind_np(&stats).unwrap();

    let dataset =
        gen_sim_dataset(&pdp, &config, &scenario, 10_000, &mut rng::from_seed(3003)).unwrap();
    let auc_np = auc_from_scores(&score_dataset_np(&dataset, &np)).unwrap();
    let auc_blind = auc_from_scores(&score_dataset_np(&dataset, &blind)).unwrap();
    assert!(
        auc_np > auc_blind,
        "noise-aware {auc_np} must beat noise-blind {auc_blind}"
    );
}

#[test]
fn degenerate_attacker_is_chance_level_for_every_detector() {
    // colocated equal-power attacker: beta = alpha
    let pdp = PowerDelayProfile::exponential(2, 1.0).unwrap();
    let config = OfdmConfig::fully_active(8, 0.125).unwrap();
    let scenario = ScenarioConfig {
        attacker_distance_m: 0.0,
        power_ratio: 1.0,
        ..ScenarioConfig::default()
    };
    let alpha = scenario.alpha();
    let beta = scenario.beta(config.carrier_wavelength());
    assert_eq!(alpha, beta);

    let stats = ChannelStatistics::from_model(
        &pdp,
        &config,
        alpha,
        beta,
        1.0,
        pla_core::channel::snr_to_noise_var(scenario.snr_db, &pdp),
    )
    .unwrap();
    let coeffs = build_np(&stats).unwrap();
    let dataset =
        gen_sim_dataset(&pdp, &config, &scenario, 10_000, &mut rng::from_seed(3004)).unwrap();

    let auc_np = auc_from_scores(&score_dataset_np(&dataset, &coeffs)).unwrap();
    assert!((auc_np - 0.5).abs() <= 0.02, "NP AUC {auc_np}");

    let pearson: Vec<(f64, bool)> = dataset
        .samples
        .iter()
        .map(|s| {
            (
                pearson_statistic(&s.h_k, &s.h_k1, PearsonMode::ComplexParts).unwrap(),
                s.label,
            )
        })
        .collect();
    let auc_pearson = auc_from_scores(&pearson).unwrap();
    assert!((auc_pearson - 0.5).abs() <= 0.02, "Pearson AUC {auc_pearson}");
}

#[test]
fn coefficients_symmetrization_kills_roundoff_skew() {
    let stats = model_stats(12, 4, 0.8, 0.35, 1.5, 0.2);
    let coeffs = build_np(&stats).unwrap();
    assert_eq!(linalg::hermitian_deviation(coeffs.a()), 0.0);
    assert_eq!(linalg::hermitian_deviation(coeffs.c()), 0.0);
    assert!(coeffs
        .b()
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite()));
}

#[test]
fn real_block_expansion_reconstructs_exactly() {
    let mut r = rng::from_seed(3005);
    let k = DMatrix::from_fn(5, 5, |_, _| {
        Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal))
    });
    let real = realify_matrix(&k);
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(real[(i, j)], k[(i, j)].re);
            assert_eq!(real[(i, j + 5)], -k[(i, j)].im);
            assert_eq!(real[(i + 5, j)], k[(i, j)].im);
            assert_eq!(real[(i + 5, j + 5)], k[(i, j)].re);
        }
    }
}
