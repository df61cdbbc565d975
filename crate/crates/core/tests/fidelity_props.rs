mod common;

use common::*;
use proptest::prelude::*;
use udisc::canonical::build_frame;
use udisc::fidelity::{self, fidelity_general, fidelity_trace_norm};
use udisc::similar::{self, DiagonalSpec};
use udisc::states;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn routes_agree_and_stay_in_range(d in 1usize..=3, extra in 0usize..=1, seed in any::<u64>()) {
        let inst = random_standard_instance(d, extra, seed);
        let f = fidelity_general(&inst.rho1, &inst.rho2).unwrap();
        let g = fidelity_general(&inst.rho2, &inst.rho1).unwrap();
        let h = fidelity_trace_norm(&inst.rho1, &inst.rho2).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&f));
        prop_assert!((f - g).abs() <= 1e-9);
        prop_assert!((f - h).abs() <= 1e-9);
    }

    #[test]
    fn similar_class_ignores_coherences(d in 1usize..=3, seed in any::<u64>()) {
        let spec = similar::random_spec(d, seed);
        let (inst, _) = similar::generate(&spec).unwrap();
        let frame = build_frame(&inst).unwrap();
        let f = fidelity_general(&inst.rho1, &inst.rho2).unwrap();
        let class = fidelity::fidelity_class_form(&frame).unwrap();
        prop_assert!((f - class).abs() <= 1e-8);
        prop_assert!(fidelity::closed_form_applicable(&frame, f));
        let weights = frame.r_diag();
        let c2: f64 = frame.overlaps.iter().zip(&weights).map(|(c, r)| c * c * r).sum();
        let proj = states::support_projectors(&inst);
        prop_assert!((proj.p2.trace_product(inst.rho1.matrix()).re - c2).abs() <= 1e-9);
    }

    #[test]
    fn diagonal_frames_satisfy_the_closed_form_test(d in 1usize..=3, seed in any::<u64>()) {
        let inst = similar::generate_diagonal(&similar::random_diagonal_spec(d, seed)).unwrap();
        let frame = build_frame(&inst).unwrap();
        let f = fidelity_general(&inst.rho1, &inst.rho2).unwrap();
        prop_assert!((f - fidelity::fidelity_diagonal_form(&frame)).abs() <= 1e-9);
        prop_assert!(fidelity::closed_form_applicable(&frame, f));
    }
}

#[test]
fn identical_and_pure_cases() {
    let inst = pure_pair(0.8, 0.5);
    assert!((fidelity_general(&inst.rho1, &inst.rho2).unwrap() - 0.8).abs() < 1e-12);
    assert!((fidelity_general(&inst.rho1, &inst.rho1).unwrap() - 1.0).abs() < 1e-12);
    let orth = pure_pair(0.0, 0.5);
    assert!(fidelity_general(&orth.rho1, &orth.rho2).unwrap().abs() < 1e-12);
}

#[test]
fn diagonal_form_reference_values() {
    let spec = DiagonalSpec {
        overlaps: vec![0.6, 0.8],
        r_diag: vec![0.5, 0.5],
        s_diag: vec![0.5, 0.5],
        eta1: 0.5,
    };
    let frame = build_frame(&similar::generate_diagonal(&spec).unwrap()).unwrap();
    assert!((fidelity::fidelity_diagonal_form(&frame) - 0.7).abs() < 1e-12);

    // 0.5 sqrt(0.18) + 0.9 sqrt(0.28), checked against the assembled states
    let spec = DiagonalSpec {
        overlaps: vec![0.5, 0.9],
        r_diag: vec![0.3, 0.7],
        s_diag: vec![0.6, 0.4],
        eta1: 0.5,
    };
    let inst = similar::generate_diagonal(&spec).unwrap();
    let frame = build_frame(&inst).unwrap();
    let diag = fidelity::fidelity_diagonal_form(&frame);
    assert!((diag - 0.688_367_270_4).abs() < 1e-9);
    assert!((fidelity_general(&inst.rho1, &inst.rho2).unwrap() - diag).abs() < 1e-9);
}

#[test]
fn generic_pairs_usually_fail_the_closed_form_test() {
    let failing = (0..20u64)
        .filter(|&seed| {
            let inst = random_standard_instance(2, 0, seed);
            let frame = build_frame(&inst).unwrap();
            let f = fidelity_general(&inst.rho1, &inst.rho2).unwrap();
            !fidelity::closed_form_applicable(&frame, f)
        })
        .count();
    assert!(failing >= 18, "only {failing} of 20 generic pairs rejected");
}

#[test]
fn necessary_interval_for_the_pure_pair() {
    // Tr(P2 rho1) = C^2 and Tr(P1 rho2) = C, so the interval is [C, 1/C]
    let inst = pure_pair(0.6, 0.5);
    let f = fidelity_general(&inst.rho1, &inst.rho2).unwrap();
    let (lo, hi) = fidelity::necessary_interval(&inst, f);
    assert!((lo - 0.6).abs() < 1e-12 && (hi - 1.0 / 0.6).abs() < 1e-12);
    let orth = pure_pair(0.0, 0.5);
    assert_eq!(fidelity::necessary_interval(&orth, 0.0), (0.0, f64::INFINITY));
}
