//! Monte Carlo checks of the channel simulator's statistical contracts.

use num_complex::Complex64;
use pla_core::channel::{
    evolve_attacker, evolve_legitimate, measure_csi, sample_taps, taps_to_cfr, ChannelTaps,
    OfdmConfig, PowerDelayProfile,
};
use pla_core::rng;

const DRAWS: usize = 100_000;

#[test]
fn tap_sample_variance_matches_profile() {
    let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
    let mut r = rng::from_seed(1001);
    let mut acc = 0.0;
    for _ in 0..DRAWS {
        let taps = sample_taps(&pdp, &mut r);
        acc += taps.taps()[0].norm_sqr();
    }
    let variance = acc / DRAWS as f64;
    assert!(
        (0.99..=1.01).contains(&variance),
        "sample variance {variance}"
    );
}

#[test]
fn evolve_alpha_zero_decorrelates() {
    let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
    let mut r = rng::from_seed(1002);
    let mut cross = Complex64::new(0.0, 0.0);
    for _ in 0..DRAWS {
        let h0 = sample_taps(&pdp, &mut r);
        let h1 = evolve_legitimate(&h0, &pdp, 0.0, &mut r).unwrap();
        cross += h1.taps()[0] * h0.taps()[0].conj();
    }
    let correlation = (cross / DRAWS as f64).norm();
    assert!(correlation < 0.02, "residual correlation {correlation}");
}

#[test]
fn evolve_alpha_tracks_lag_one_correlation() {
    let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
    let mut r = rng::from_seed(1003);
    let mut cross = Complex64::new(0.0, 0.0);
    for _ in 0..DRAWS {
        let h0 = sample_taps(&pdp, &mut r);
        let h1 = evolve_legitimate(&h0, &pdp, 0.9, &mut r).unwrap();
        cross += h1.taps()[0] * h0.taps()[0].conj();
    }
    let correlation = (cross / DRAWS as f64).re;
    assert!(
        (0.88..=0.92).contains(&correlation),
        "lag-one correlation {correlation}"
    );
}

#[test]
fn attacker_power_is_scaled_by_theta() {
    let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
    let mut r = rng::from_seed(1004);
    let mut acc = 0.0;
    for _ in 0..DRAWS {
        let h0 = sample_taps(&pdp, &mut r);
        let h1 = evolve_attacker(&h0, &pdp, 0.0, 4.0, &mut r).unwrap();
        acc += h1.taps()[0].norm_sqr();
    }
    let variance = acc / DRAWS as f64;
    assert!(
        (0.245..=0.255).contains(&variance),
        "attacker tap variance {variance}"
    );
}

#[test]
fn attacker_cross_correlation_matches_beta() {
    let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
    let mut r = rng::from_seed(1005);
    let mut cross = Complex64::new(0.0, 0.0);
    for _ in 0..DRAWS {
        let h0 = sample_taps(&pdp, &mut r);
        let h1 = evolve_attacker(&h0, &pdp, 0.5, 1.0, &mut r).unwrap();
        cross += h1.taps()[0] * h0.taps()[0].conj();
    }
    let correlation = (cross / DRAWS as f64).re;
    assert!(
        (0.48..=0.52).contains(&correlation),
        "cross correlation {correlation}"
    );
}

#[test]
fn marginals_survive_repeated_evolution() {
    // after several Gauss-Markov steps each tap keeps its variance
    let pdp = PowerDelayProfile::exponential(3, 1.0).unwrap();
    let mut r = rng::from_seed(1006);
    let mut acc = vec![0.0; 3];
    for _ in 0..DRAWS {
        let mut taps = sample_taps(&pdp, &mut r);
        for _ in 0..5 {
            taps = evolve_legitimate(&taps, &pdp, 0.85, &mut r).unwrap();
        }
        for (a, t) in acc.iter_mut().zip(taps.taps()) {
            *a += t.norm_sqr();
        }
    }
    for (l, (&measured, &expected)) in acc.iter().zip(pdp.tap_variances()).enumerate() {
        let variance = measured / DRAWS as f64;
        assert!(
            (variance - expected).abs() <= 0.02 * expected,
            "tap {l}: variance {variance} vs expected {expected}"
        );
    }
}

#[test]
fn attacker_correlation_contract_per_tap() {
    // E[h_ma h_ba^*] = (beta / sqrt(theta)) * variance(l), within 2%
    let pdp = PowerDelayProfile::exponential(2, 0.7).unwrap();
    let (beta, theta) = (0.6, 2.0);
    let mut r = rng::from_seed(1007);
    let mut cross = vec![Complex64::new(0.0, 0.0); 2];
    for _ in 0..DRAWS {
        let h0 = sample_taps(&pdp, &mut r);
        let h1 = evolve_attacker(&h0, &pdp, beta, theta, &mut r).unwrap();
        for (c, (a, b)) in cross.iter_mut().zip(h1.taps().iter().zip(h0.taps())) {
            *c += a * b.conj();
        }
    }
    for (l, (&c, &v)) in cross.iter().zip(pdp.tap_variances()).enumerate() {
        let measured = (c / DRAWS as f64).re;
        let expected = beta / theta.sqrt() * v;
        assert!(
            (measured - expected).abs() <= 0.02 * expected.max(0.01),
            "tap {l}: cross {measured} vs expected {expected}"
        );
    }
}

#[test]
fn cfr_power_is_flat_across_subcarriers() {
    let pdp = PowerDelayProfile::exponential(4, 0.8).unwrap();
    let config = OfdmConfig::default_80211_legacy();
    let mut r = rng::from_seed(1008);
    let mut acc = vec![0.0; config.num_active()];
    let draws = 20_000;
    for _ in 0..draws {
        let cfr = taps_to_cfr(&sample_taps(&pdp, &mut r), &config).unwrap();
        for (a, h) in acc.iter_mut().zip(cfr.iter()) {
            *a += h.norm_sqr();
        }
    }
    for (m, &sum) in acc.iter().enumerate() {
        let power = sum / draws as f64;
        assert!(
            (power - 1.0).abs() <= 0.02,
            "subcarrier {m}: power {power}"
        );
    }
}

#[test]
fn measurement_noise_variance_is_calibrated() {
    let cfr = taps_to_cfr(
        &ChannelTaps::new(vec![Complex64::new(0.7, -0.2)]),
        &OfdmConfig::fully_active(2, 0.125).unwrap(),
    )
    .unwrap();
    let mut r = rng::from_seed(1009);
    let mut acc = 0.0;
    for _ in 0..DRAWS {
        let measured = measure_csi(&cfr, 0.1, &mut r);
        acc += (measured.values()[0] - cfr[0]).norm_sqr();
    }
    let variance = acc / DRAWS as f64;
    assert!(
        (0.098..=0.102).contains(&variance),
        "noise variance {variance}"
    );
}
