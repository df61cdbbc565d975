mod common;

use common::*;
use proptest::prelude::*;
use udisc::canonical::{build_frame, FrameError};
use udisc::linalg::{self, inner, CMatrix};
use udisc::similar::{self, SimilarClassSpec};
use udisc::states::{self, make_instance, validate_density};

fn frame_invariants(inst: &udisc::DiscriminationInstance) -> Result<(), TestCaseError> {
    let frame = build_frame(inst).unwrap();
    let d = frame.rank();
    prop_assert!(frame.residuals().max() <= 1e-9, "{:?}", frame.residuals());
    prop_assert!(frame.overlaps.windows(2).all(|w| w[0] <= w[1]));
    prop_assert!(linalg::distance(&frame.rho1(), inst.rho1.matrix()) <= 1e-9);
    prop_assert!(linalg::distance(&frame.rho2(), inst.rho2.matrix()) <= 1e-9);
    for i in 0..d {
        for j in 0..d {
            let vw = inner(&frame.v(i), &frame.w(j));
            let expect = if i == j { -frame.overlaps[i] } else { 0.0 };
            prop_assert!((vw.re - expect).abs() <= 1e-9 && vw.im.abs() <= 1e-9);
            let vs = inner(&frame.v(i), &frame.s(j));
            let wr = inner(&frame.w(i), &frame.r(j));
            prop_assert!(vs.norm() <= 1e-9 && wr.norm() <= 1e-9);
        }
    }

    // overlaps squared against an explicit P1 P2 P1 and P2 P1 P2
    let proj = states::support_projectors(inst);
    let p121 = (&(&proj.p1 * &proj.p2) * &proj.p1).hermitian_part();
    let p212 = (&(&proj.p2 * &proj.p1) * &proj.p2).hermitian_part();
    for m in [p121, p212] {
        let eig = linalg::eigh(&m).unwrap();
        let top = &eig.eigenvalues[eig.eigenvalues.len() - d..];
        for (c, l) in frame.overlaps.iter().zip(top) {
            prop_assert!((c * c - l).abs() <= 1e-9, "{} vs {}", c * c, l);
        }
    }

    // sum |r_i><r_i| + |w_i><w_i| is the projector onto the joint support
    let joint = states::joint_support_basis(inst);
    let mut total = CMatrix::zeros(frame.dim, frame.dim);
    for i in 0..d {
        total = &total + &CMatrix::outer(&frame.r(i), &frame.r(i));
        total = &total + &CMatrix::outer(&frame.w(i), &frame.w(i));
    }
    let pj = &joint * &joint.adjoint();
    prop_assert!(linalg::distance(&total, &pj) <= 1e-9);
    Ok(())
}


proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_standard_frames(d in 1usize..=3, extra in 0usize..=2, seed in any::<u64>()) {
        let inst = random_standard_instance(d, extra, seed);
        prop_assert!(inst.is_standard_shape());
        frame_invariants(&inst)?;
    }

    #[test]
    fn overlaps_survive_a_global_unitary(d in 1usize..=3, seed in any::<u64>()) {
        let inst = random_standard_instance(d, 0, seed);
        let u = random_unitary(2 * d, &mut rng(seed ^ 1));
        let moved = rotate_instance(&inst, &u);
        let a = build_frame(&inst).unwrap();
        let b = build_frame(&moved).unwrap();
        for (x, y) in a.overlaps.iter().zip(&b.overlaps) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        frame_invariants(&moved)?;
    }

    #[test]
    fn similar_class_frames(d in 1usize..=3, seed in any::<u64>()) {
        let spec = similar::random_spec(d, seed);
        let (inst, _) = similar::generate(&spec).unwrap();
        frame_invariants(&inst)?;
        let frame = build_frame(&inst).unwrap();
        let mut expect = spec.overlaps();
        expect.sort_by(f64::total_cmp);
        for (c, e) in frame.overlaps.iter().zip(&expect) {
            prop_assert!((c - e).abs() <= 1e-9);
        }
        prop_assert!(linalg::distance(&frame.r_mat, &frame.s_mat) <= 1e-9);
    }

    #[test]
    fn support_captures_all_weight(d in 1usize..=3, extra in 0usize..=2, seed in any::<u64>()) {
        let inst = random_standard_instance(d, extra, seed);
        let proj = states::support_projectors(&inst);
        prop_assert!((proj.p1.trace_product(inst.rho1.matrix()).re - 1.0).abs() <= 1e-9);
        prop_assert!((proj.p2.trace_product(inst.rho2.matrix()).re - 1.0).abs() <= 1e-9);
        for p in [&proj.p1, &proj.p2] {
            prop_assert!(linalg::distance(&(p * p), p) <= 1e-9);
            prop_assert!((p.trace().re - d as f64).abs() <= 1e-9);
        }
        let sum = (&proj.p1 + &proj.p2).hermitian_part();
        let rank = linalg::eigh(&sum).unwrap().eigenvalues.iter().filter(|&&l| l > 1e-9).count();
        prop_assert_eq!(rank, 2 * d);
    }
}

#[test]
fn similar_pair_with_coherence_keeps_it() {
    let r_mat = CMatrix::from_real_rows(&[&[0.5, 0.2], &[0.2, 0.5]]);
    let spec = SimilarClassSpec {
        d: 2,
        r_mat: r_mat.clone(),
        thetas: vec![0.3, 0.7],
        eta1: 0.5,
    };
    let (inst, _) = similar::generate(&spec).unwrap();
    assert_eq!(inst.joint_dim(), 4);
    let frame = build_frame(&inst).unwrap();
    assert!((frame.overlaps[0] - 0.7f64.cos()).abs() < 1e-12);
    assert!((frame.overlaps[1] - 0.3f64.cos()).abs() < 1e-12);
    assert!(linalg::distance(&frame.r_mat, &frame.s_mat) < 1e-9);
    // the ascending sort swaps the planes, so the coherence magnitude is what survives
    assert!((frame.r_mat[(0, 1)].norm() - 0.2).abs() < 1e-9);
    let proj = states::support_projectors(&inst);
    let expect = 0.3f64.cos().powi(2) + 0.7f64.cos().powi(2);
    assert!((proj.p1.trace_product(&proj.p2).re - expect).abs() < 1e-9);
}

#[test]
fn equal_angles_are_degenerate_but_valid() {
    let spec = SimilarClassSpec {
        d: 3,
        r_mat: density(&random_psd(3, 3, &mut rng(9))),
        thetas: vec![0.8; 3],
        eta1: 0.4,
    };
    let (inst, _) = similar::generate(&spec).unwrap();
    let frame = build_frame(&inst).unwrap();
    assert!(frame.residuals().max() < 1e-9);
    assert!(frame.overlaps.iter().all(|c| (c - 0.8f64.cos()).abs() < 1e-9));
}

#[test]
fn one_orthogonal_plane() {
    let spec = udisc::similar::DiagonalSpec {
        overlaps: vec![0.0, 0.5],
        r_diag: vec![0.3, 0.7],
        s_diag: vec![0.6, 0.4],
        eta1: 0.5,
    };
    let inst = similar::generate_diagonal(&spec).unwrap();
    let frame = build_frame(&inst).unwrap();
    assert!(frame.residuals().max() < 1e-9);
    assert_eq!(frame.overlaps[0], 0.0);
    assert!((frame.overlaps[1] - 0.5).abs() < 1e-12);
}

#[test]
fn rejects_non_standard_pairs() {
    let rho = validate_density(CMatrix::diag_real(&[0.5, 0.5])).unwrap();
    let inst = make_instance(rho.clone(), rho, 0.5).unwrap();
    assert!(!inst.is_standard_shape());
    assert!(matches!(build_frame(&inst), Err(FrameError::NotStandardShape { .. })));
}

#[test]
fn rotation_matches_its_generator() {
    // U = exp(sum theta_i (|w_i><r_i| - |r_i><w_i|)), summed as a power series
    let thetas = [0.3, 0.7, 1.1];
    let d = thetas.len();
    let mut gen = CMatrix::zeros(2 * d, 2 * d);
    for (i, &t) in thetas.iter().enumerate() {
        gen[(d + i, i)] = num_complex::Complex64::new(t, 0.0);
        gen[(i, d + i)] = num_complex::Complex64::new(-t, 0.0);
    }
    let mut term = CMatrix::identity(2 * d);
    let mut sum = term.clone();
    for k in 1..40 {
        term = (&term * &gen).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    let u = similar::block_rotation(&thetas);
    assert!(linalg::distance(&u, &sum) < 1e-10);
    for i in 0..d {
        for j in 0..d {
            let expect = if i == j { thetas[i].cos() } else { 0.0 };
            assert!((u[(j, i)].re - expect).abs() < 1e-12);
        }
    }
}
