use std::sync::OnceLock;

use fbmlab::gaussian::{CovarianceModel, FbmSampler};
use fbmlab::representation::{
    build_partition, build_representation, case1_coefficient, construction_grid, mu_window, run_blocks,
    target_constant, target_lipschitz, tail_weighted_norm_diagnostic, ConstructionGrid, GridLayout, LipschitzMap,
    PartitionScheme, RepresentationTrace,
};
use fbmlab::HurstParam;
use proptest::prelude::*;

struct Setup {
    scheme: PartitionScheme,
    cg: ConstructionGrid,
    sampler: FbmSampler,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let h = HurstParam::new(0.7).unwrap();
        let scheme = build_partition(2.2, 3.0, 10, h).unwrap();
        let cg = construction_grid(&scheme, GridLayout::default()).unwrap();
        let sampler = FbmSampler::new(h, &cg.grid, CovarianceModel::default()).unwrap();
        Setup { scheme, cg, sampler }
    })
}

#[test]
fn partition_reference_values() {
    let scheme = build_partition(2.2, 3.0, 10, HurstParam::new(0.7).unwrap()).unwrap();
    for (n, tail, width, coeff) in [
        (3, 0.110_803_158_362_333_88, 0.053_608_866_779_137_405, 93.307_644_107_608_26),
        (6, 0.007_907_054_051_593_44, 0.006_061_291_173_262_957, 325.521_221_906_569),
    ] {
        let l = scheme.level(n);
        assert!((l.tail - tail).abs() < 1e-14 * tail);
        assert!((l.width - width).abs() < 1e-13 * width);
        assert!((l.coefficient - coeff).abs() < 1e-11 * coeff);
    }
    let (lo, hi) = mu_window(2.2, 3.0).unwrap();
    assert_eq!(lo, 0.5);
    assert!((hi - 2.137_354_467_360_323).abs() < 1e-13);
}

#[test]
fn rejects_kappa_outside_window() {
    let h = HurstParam::new(0.7).unwrap();
    assert!(build_partition(5.0, 2.0, 10, h).is_err());
    assert!(build_partition(2.0, 3.0, 10, h).is_err());
    assert!(build_partition(2.2, 3.0, 10, HurstParam::new(0.4).unwrap()).is_err());
}

#[test]
fn zero_target_gives_zero_integrand() {
    let s = setup();
    let path = s.sampler.sample(4);
    let (psi, trace) = build_representation(&target_constant(0.0), &path, &s.scheme, &s.cg).unwrap();
    assert!(psi.is_zero());
    assert_eq!(trace.summary.final_value, 0.0);
    assert!(trace.levels.iter().all(|l| l.blocks_used == 0));
}

#[test]
fn trace_survives_json() {
    let s = setup();
    let path = s.sampler.sample(9);
    let (_, trace) = build_representation(&target_lipschitz(LipschitzMap::Sine), &path, &s.scheme, &s.cg).unwrap();
    assert_eq!(RepresentationTrace::from_json(&trace.to_json().unwrap()).unwrap(), trace);
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), trace.levels.len() + 1);
}

#[test]
fn tail_norms_are_finite() {
    let s = setup();
    let path = s.sampler.sample(2);
    let (psi, _) = build_representation(&target_lipschitz(LipschitzMap::Identity), &path, &s.scheme, &s.cg).unwrap();
    let norms = tail_weighted_norm_diagnostic(&psi, &s.scheme, 0.4, 1.0).unwrap();
    assert_eq!(norms.len(), 7);
    assert!(norms.iter().all(|n| n.value.is_finite() && !n.diverged));
    assert!(tail_weighted_norm_diagnostic(&psi, &s.scheme, 0.2, 1.0).is_err());
    assert!(tail_weighted_norm_diagnostic(&psi, &s.scheme, 0.4, 2.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stopped_runs_reach_the_gap_with_bounded_overshoot(
        terms in prop::collection::vec(0.0f64..1.0, 1..40),
        gap in -5.0f64..5.0,
    ) {
        let run = run_blocks(terms.len(), gap, |k| terms[k]);
        if gap == 0.0 {
            prop_assert_eq!(run.used, 0);
        } else if run.exhausted {
            prop_assert!(run.sum < gap.abs());
            prop_assert_eq!(run.used, terms.len());
        } else {
            prop_assert!(run.sum >= gap.abs());
            prop_assert!(run.overshoot(gap) <= run.max_term);
            prop_assert!(run.sum - terms[run.used - 1] < gap.abs());
        }
    }

    #[test]
    fn case1_coefficient_scales_with_the_gap(gap in 1e-6f64..10.0, c in 1e-3f64..1e3, len in 1e-9f64..0.5, split in 1usize..8) {
        let a = case1_coefficient(gap, len, split, 1.4);
        let b = case1_coefficient(c * gap, len, split, 1.4);
        prop_assert!((b - c * a).abs() <= 1e-12 * b.abs());
        prop_assert_eq!(case1_coefficient(-gap, len, split, 1.4), a);
    }

    #[test]
    fn construction_is_causal_and_accounted(seed in 0u64..100_000, map in 0usize..3) {
        let s = setup();
        let map = [LipschitzMap::Identity, LipschitzMap::Sine, LipschitzMap::Scaled { factor: -2.5 }][map];
        let path = s.sampler.sample(seed);
        let (psi, trace) = build_representation(&target_lipschitz(map), &path, &s.scheme, &s.cg).unwrap();
        prop_assert!(trace.causality.ok());
        prop_assert!(trace.causality.reads > 0);
        let sum: f64 = trace.levels.iter().map(|l| l.overshoot).sum();
        let last = trace.levels.last().unwrap().xi_error;
        prop_assert!(trace.summary.final_error <= (last + sum) * (1.0 + 1e-12));
        let v = psi.stochastic_integral();
        prop_assert!((v - trace.summary.final_value).abs() <= 1e-9 * (1.0 + v.abs()));
        for l in &trace.levels {
            prop_assert!((l.gap - (l.xi_n - l.v_start)).abs() <= 1e-12 * (1.0 + l.xi_n.abs()));
            if !l.exhausted && l.blocks_used > 0 {
                prop_assert!(l.overshoot <= l.max_block_term * (1.0 + 1e-9), "level {}: {} > {}", l.n, l.overshoot, l.max_block_term);
            }
        }
    }
}
