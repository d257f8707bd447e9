use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use projlab::minproj::{
    embed_into_linf, lambda_absolute_approx, lambda_relative, minimal_projection, EmbedScheme, MinProjCertificate,
    MinProjOptions,
};
use projlab::spaces::{gaussian, NormOptions};
use projlab::{Matrix, NormedSpace, Subspace};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn results_are_feasible_and_recheck(seed in any::<u64>(), n in 2usize..5, kind in 0usize..3) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = Arc::new(match kind {
            0 => NormedSpace::linf(n),
            1 => NormedSpace::l1(n),
            _ => NormedSpace::l2(n),
        });
        let k = r.random_range(1..n);
        let y = Subspace::new(s.clone(), Matrix::from_fn(n, k, |_, _| gaussian(&mut r)), "Y").unwrap();
        let res = lambda_relative(&y, 0.05).unwrap();
        let p = &res.projection;
        prop_assert!(p.idempotence_residual() <= 1e-9);
        prop_assert!(p.image().same_as(&y));
        let again = p.norm(&NormOptions::default()).unwrap().value;
        prop_assert!((again - res.lambda).abs() <= 1e-6 * res.lambda);
        prop_assert!(res.lower <= res.lambda + 1e-9);
        prop_assert!(res.lambda <= res.lower * (1.0 + 0.05) + 1e-9);
        prop_assert!(res.lambda >= 1.0 - 1e-9);
    }

    /// Extra ambient coordinates that leave the norm of `Y` unchanged (convex
    /// combinations of existing functionals) cannot raise the optimum.
    #[test]
    fn dominated_coordinates_do_not_raise_the_optimum(seed in any::<u64>(), extra in 1usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let k = 2;
        let m = 4;
        let f = Matrix::from_fn(m, k, |_, _| gaussian(&mut r));
        let mut g = Matrix::zeros(m + extra, k);
        g.rows_mut(0, m).copy_from(&f);
        for i in 0..extra {
            let w: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
            let t: f64 = w.iter().map(|x| x.abs()).sum();
            for j in 0..m {
                let row = f.row(j) * (w[j] / t);
                let cur = g.row(m + i) + row;
                g.row_mut(m + i).copy_from(&cur);
            }
        }
        let small = Subspace::new(Arc::new(NormedSpace::linf(m)), f, "Y").unwrap();
        let big = Subspace::new(Arc::new(NormedSpace::linf(m + extra)), g, "Y").unwrap();
        let a = lambda_relative(&small, 0.05).unwrap();
        let b = lambda_relative(&big, 0.05).unwrap();
        prop_assert!(matches!(a.certificate, MinProjCertificate::ExactLp));
        prop_assert!(b.lambda <= a.lambda + 1e-8, "{} > {}", b.lambda, a.lambda);
    }
}

#[test]
fn kernel_constraint_is_respected() {
    let s = Arc::new(NormedSpace::linf(3));
    let full = Subspace::full(s.clone());
    let y = Subspace::new(s.clone(), Matrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]), "Y").unwrap();
    let k = Subspace::new(s, Matrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]), "K").unwrap();
    let res = minimal_projection(&full, &y, Some(&k), &MinProjOptions::default()).unwrap();
    let pk = res.projection.matrix() * k.basis();
    assert!(pk.amax() <= 1e-12);
    // the diagonal of l_inf^2 is 1-complemented
    assert!((res.lambda - 1.0).abs() <= 1e-9);
}

#[test]
fn l1_diagonal_is_one_complemented() {
    let s = Arc::new(NormedSpace::l1(2));
    let y = Subspace::new(s, Matrix::from_column_slice(2, 1, &[1.0, 1.0]), "Y").unwrap();
    assert!((lambda_relative(&y, 0.05).unwrap().lambda - 1.0).abs() <= 1e-9);
}

#[test]
fn sum_zero_plane_in_l_inf_3() {
    // the sum-zero plane of l_inf^3 has constant 4/3
    let s = Arc::new(NormedSpace::linf(3));
    let b = Matrix::from_column_slice(3, 2, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
    let y = Subspace::new(s, b, "Y").unwrap();
    let l = lambda_relative(&y, 0.05).unwrap().lambda;
    assert!((l - 4.0 / 3.0).abs() <= 1e-9, "{l}");
}

#[test]
fn euclidean_estimates_grow_with_dimension() {
    let opts = MinProjOptions::default();
    let mut last = 0.0;
    for k in 1..=3 {
        let e = lambda_absolute_approx(&NormedSpace::l2(k), &[64], EmbedScheme::Grid, &opts).unwrap();
        let l = e[0].result.lambda;
        assert!(l > last + 1e-3, "k = {k}: {l} <= {last}");
        last = l;
    }
}

#[test]
fn embeddings_are_nearly_isometric() {
    for (n, m) in [(2, 16), (3, 32)] {
        let e = embed_into_linf(&NormedSpace::l2(n), m, EmbedScheme::Grid).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(n as u64);
        for _ in 0..200 {
            let c = projlab::Vector::from_fn(n, |_, _| gaussian(&mut r));
            let img = e.copy.basis() * &c;
            let v = e.ambient.norm(&img).unwrap();
            assert!(v <= c.norm() + 1e-12);
            assert!(v >= (1.0 - e.eta) * c.norm() - 1e-12);
        }
    }
}
