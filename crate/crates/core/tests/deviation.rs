use fbmlab::deviation::{
    autocovariance_rho, corrected_small_dev_bound, gaussian_small_dev_bound, increment_covariance_matrix,
    mc_small_deviation, squared_cov_sum, RateRegime, Regime,
};
use fbmlab::HurstParam;
use proptest::prelude::*;

fn h(v: f64) -> HurstParam {
    HurstParam::new(v).unwrap()
}

#[test]
fn autocovariance_reference_values() {
    let cases = [
        (1u64, 0.319_507_910_772_894_26),
        (3, 0.146_173_442_211_311_8),
        (10, 0.070_389_262_701_115_28),
        (100, 0.017_666_946_984_300_41),
        (1000, 0.004_437_701_293_907_304),
        (1_000_000, 7.033_282_008_227_387e-5),
    ];
    for (m, want) in cases {
        let got = autocovariance_rho(m, h(0.7));
        assert!((got - want).abs() < 1e-12 * want, "m = {m}: {got} vs {want}");
    }
}

#[test]
fn squared_sum_reference_values() {
    for (n, hv, want) in [
        (2u64, 0.7, 2.204_170_610_092_919_5),
        (16, 0.7, 21.906_866_626_426_496),
        (256, 0.7, 411.024_410_020_465_2),
        (1024, 0.6, 1_106.220_498_552_213_5),
    ] {
        let got = squared_cov_sum(n, h(hv));
        assert!((got - want).abs() < 1e-11 * want, "n = {n}: {got} vs {want}");
    }
}

#[test]
fn bound_reference_values() {
    let cov = increment_covariance_matrix(8, h(0.7));
    let b = gaussian_small_dev_bound(4.0, &cov).unwrap();
    let c = corrected_small_dev_bound(4.0, &cov).unwrap();
    assert!((b - 0.211_878_367_073_563_05).abs() < 1e-13);
    assert!((c - 0.678_455_948_061_614_1).abs() < 1e-13);
}

#[test]
fn regimes_split_at_three_quarters() {
    assert_eq!(RateRegime::new(h(0.6)).regime, Regime::Sub34);
    assert_eq!(RateRegime::new(h(0.75)).regime, Regime::At34);
    assert_eq!(RateRegime::new(h(0.9)).regime, Regime::Super34);
}

#[test]
fn monte_carlo_is_reproducible() {
    let a = mc_small_deviation(8, h(0.7), 0.5, 5000, 3).unwrap();
    let b = mc_small_deviation(8, h(0.7), 0.5, 5000, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.ci_low <= a.estimate && a.estimate <= a.ci_high);
}

proptest! {
    #[test]
    fn rho_is_positive_and_decreasing(hv in 0.51f64..0.99, m in 1u64..5000) {
        let r0 = autocovariance_rho(m, h(hv));
        let r1 = autocovariance_rho(m + 1, h(hv));
        prop_assert!(r0 > 0.0 && r1 < r0);
    }

    #[test]
    fn squared_sum_grows_at_least_linearly(hv in 0.51f64..0.99, n in 2u64..300) {
        let s0 = squared_cov_sum(n, h(hv));
        let s1 = squared_cov_sum(n + 1, h(hv));
        prop_assert!(s1 - s0 >= 1.0 - 1e-12);
    }

    #[test]
    fn bounds_are_ordered_probabilities(hv in 0.51f64..0.99, n in 1usize..24, frac in 0.05f64..0.95) {
        let cov = increment_covariance_matrix(n, h(hv));
        let x = frac * n as f64;
        let b = gaussian_small_dev_bound(x, &cov).unwrap();
        let c = corrected_small_dev_bound(x, &cov).unwrap();
        prop_assert!(0.0 < b && b <= c && c <= 1.0);
    }
}
