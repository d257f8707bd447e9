use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use projlab::error::Error;
use projlab::fdd::{
    blocking_step, commuting_chain, commuting_construction, perturb_decomposition, random_perturbations,
    strong_limit_simulation, Decomposition, OuterChoice,
};
use projlab::instances;
use projlab::projections::composition_table;
use projlab::spaces::NormOptions;
use projlab::{Matrix, NormedSpace, Subspace};

fn sizes(r: &mut impl Rng, n: usize) -> Vec<usize> {
    let parts = r.random_range(2..=n);
    let mut s = vec![1; parts];
    for _ in parts..n {
        let i = r.random_range(0..parts);
        s[i] += 1;
    }
    s
}

fn random_decomposition(seed: u64) -> Decomposition {
    let mut r = instances::rng(seed);
    let n = r.random_range(3..=6);
    let s = sizes(&mut r, n);
    let space = Arc::new(if r.random_bool(0.5) { NormedSpace::linf(n) } else { NormedSpace::l1(n) });
    instances::random_decomposition(&mut r, space, &s, 0.3, &NormOptions::default()).unwrap()
}

/// `S_n` by hand: coordinates in the stacked block basis, keep the first `n` groups.
fn canonical_by_hand(d: &Decomposition, n: usize) -> Matrix {
    let refs: Vec<&Matrix> = d.blocks().iter().map(|b| b.basis()).collect();
    let total: usize = refs.iter().map(|b| b.ncols()).sum();
    let mut stacked = Matrix::zeros(d.ambient().dim(), total);
    let mut keep = Matrix::zeros(total, total);
    let mut at = 0;
    for (i, b) in refs.iter().enumerate() {
        stacked.columns_mut(at, b.ncols()).copy_from(*b);
        if i < n {
            for j in at..at + b.ncols() {
                keep[(j, j)] = 1.0;
            }
        }
        at += b.ncols();
    }
    let inv = stacked.clone().try_inverse().unwrap();
    &stacked * keep * inv
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn canonical_projections_obey_the_law(seed in any::<u64>()) {
        let d = random_decomposition(seed);
        prop_assert!(d.law_residual() <= 1e-9);
        prop_assert!(d.constant() >= 1.0 - 1e-9);
        for n in 0..=d.len() {
            let s = d.canonical(n);
            prop_assert!((&s - canonical_by_hand(&d, n)).amax() <= 1e-9);
        }
    }

    #[test]
    fn small_perturbations_barely_move_the_constant(seed in any::<u64>()) {
        let d = random_decomposition(seed);
        let o = NormOptions::default();
        let l = d.len();
        let eps = vec![1e-5 / l as f64; l];
        let e = random_perturbations(&d, &eps, seed ^ 0x5eed, &o).unwrap();
        let p = perturb_decomposition(&d, &e, Some(&eps), &o).unwrap();
        prop_assert!((p.sum - 1e-5).abs() <= 1e-12);
        for (m, c) in p.measured.iter().zip(&eps) {
            prop_assert!((m - c).abs() <= 1e-9 * c.max(1e-12) + 1e-15);
        }
        prop_assert!(p.decomposition.law_residual() <= 1e-9);
        prop_assert!((p.decomposition.constant() - d.constant()).abs() <= 1e-3);
    }

    #[test]
    fn refusal_tracks_the_hypothesis(seed in any::<u64>(), frac in 0.2f64..3.0) {
        let d = random_decomposition(seed);
        let o = NormOptions::default();
        let l = d.len();
        let bound = 1.0 / (2.0 * d.constant());
        let eps = vec![frac * bound / l as f64; l];
        let e = random_perturbations(&d, &eps, seed, &o).unwrap();
        match perturb_decomposition(&d, &e, Some(&eps), &o) {
            Ok(p) => {
                prop_assert!(p.sum < bound);
                prop_assert!(p.decomposition.law_residual() <= 1e-9);
                prop_assert!(p.decomposition.constant().is_finite());
            }
            Err(Error::PerturbationHypothesis { sum, bound: b }) => {
                prop_assert!(sum >= b);
                prop_assert!(frac >= 1.0 - 1e-9);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn blocking_keeps_its_invariants(seed in 0u64..100_000) {
        let o = NormOptions::default();
        let (d, h, k, eps) = instances::random_blocking(seed, &o).unwrap();
        let b = blocking_step(&d, &h, k, eps, &o).unwrap();
        prop_assert!(b.small_residual <= eps);
        prop_assert!(b.span_residual <= 1e-8);
        prop_assert!(b.fixed_residual <= 1e-10);
        prop_assert!(b.perturbed.law_residual() <= 1e-9);
        prop_assert!(b.blocking.law_residual() <= 1e-9);
        // the leading blocks are untouched
        for i in 0..k {
            prop_assert!(b.perturbed.blocks()[i].same_as(&d.blocks()[i]));
        }
        prop_assert!(h.contains(&b.perturbed.partial_sum(k)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn commuting_projections_agree_with_their_tables(seed in 0u64..100_000) {
        let o = NormOptions::default();
        let s = instances::random_interlaced(seed, 8, OuterChoice::Orthogonal, &o).unwrap();
        let c = commuting_construction(&s, &o).unwrap();
        let cert = &c.certificates;
        prop_assert!(cert.idempotence <= 1e-9 && cert.next_law <= 1e-9 && cert.pairwise_law <= 1e-9);
        prop_assert!(cert.fixes_image <= 1e-9 && cert.image_inclusion <= 1e-9);
        prop_assert!(cert.bound_excess <= 1e-6);
        for (n, b) in c.norms.iter().zip(&c.bounds) {
            prop_assert!(*n <= b + 1e-6);
            prop_assert!(*n >= 1.0 - 1e-9);
        }
        let top = c.norms.iter().cloned().fold(0.0, f64::max);
        let chain = commuting_chain(&s, &c).unwrap();
        let t = composition_table(&chain, &o).unwrap();
        prop_assert!((t.sup - top).abs() <= 1e-6, "table {} vs norms {}", t.sup, top);
        let lim = strong_limit_simulation(&chain, 1e6, &o).unwrap();
        prop_assert!((lim.max_norm - top).abs() <= 1e-6);
        prop_assert!(lim.commute_residual <= 1e-9);
    }
}

#[test]
fn coordinate_decomposition_has_constant_one() {
    let o = NormOptions::default();
    for n in 2..=6 {
        let d = Decomposition::coordinate(Arc::new(NormedSpace::linf(n)), &vec![1; n], &o).unwrap();
        assert!((d.constant() - 1.0).abs() <= 1e-12);
        assert_eq!(d.law_residual(), 0.0);
    }
}

#[test]
fn skewed_pair_in_l_inf_2() {
    // W_1 = span(1, 0), W_2 = span(1, 1): S_1 = [[1, -1], [0, 0]] has norm 2
    let s = Arc::new(NormedSpace::linf(2));
    let w1 = Subspace::new(s.clone(), Matrix::from_column_slice(2, 1, &[1.0, 0.0]), "W1").unwrap();
    let w2 = Subspace::new(s.clone(), Matrix::from_column_slice(2, 1, &[1.0, 1.0]), "W2").unwrap();
    let d = Decomposition::new(s, vec![w1, w2], &NormOptions::default()).unwrap();
    let s1 = d.canonical(1);
    assert!((s1 - Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0])).amax() <= 1e-12);
    assert!((d.constant() - 2.0).abs() <= 1e-12);
}

#[test]
fn dependent_blocks_are_rejected() {
    let s = Arc::new(NormedSpace::linf(2));
    let w = Subspace::new(s.clone(), Matrix::from_column_slice(2, 1, &[1.0, 2.0]), "W").unwrap();
    assert!(Decomposition::new(s, vec![w.clone(), w], &NormOptions::default()).is_err());
}

#[test]
fn golden_blocking_fixes_the_first_block() {
    let o = NormOptions::default();
    let (d, h, k, eps) = instances::golden_blocking(&o).unwrap();
    let b = blocking_step(&d, &h, k, eps, &o).unwrap();
    assert!(b.small_residual <= eps);
    assert!(b.fixed_residual <= 1e-10);
    assert!(b.span_residual <= 1e-8);
    let e1 = projlab::Vector::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!((&b.a * &e1 - &e1).amax() <= 1e-12);
}
