use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use projlab::instances;
use projlab::projections::{
    composition_table, factor_through, make_projection, minimize_chain_blowup, orthogonal_projection, BlowupOptions,
    Chain, Projection,
};
use projlab::spaces::{gaussian, NormOptions};
use projlab::{Matrix, NormedSpace, Subspace};

fn random_chain(seed: u64, n: usize, len: usize) -> Chain {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let s = Arc::new(NormedSpace::linf(n));
    let b = Matrix::from_fn(n, n, |_, _| gaussian(&mut r));
    let subs = (1..=len)
        .map(|k| Subspace::new(s.clone(), b.columns(0, k).into_owned(), format!("X{k}")).unwrap())
        .collect();
    Chain::new(subs).unwrap().with_orthogonal_steps().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tables_extend_without_changing_entries(seed in any::<u64>(), n in 3usize..6) {
        let o = NormOptions::default();
        let chain = random_chain(seed, n, n);
        let short = composition_table(&chain.truncate(n - 1), &o).unwrap();
        let long = composition_table(&chain, &o).unwrap();
        for e in &short.entries {
            let f = long.get(e.k, e.l).unwrap();
            prop_assert!((e.norm - f.norm).abs() <= 1e-12);
        }
        prop_assert!(long.entries.len() > short.entries.len());
        prop_assert!(long.sup >= short.sup - 1e-12);
    }

    #[test]
    fn compositions_have_norm_at_least_one(seed in any::<u64>(), n in 2usize..6) {
        let t = composition_table(&random_chain(seed, n, n), &NormOptions::default()).unwrap();
        for e in &t.entries {
            prop_assert!(e.norm >= 1.0 - 1e-9, "M({}, {}) = {}", e.k, e.l, e.norm);
        }
    }

    #[test]
    fn orthogonal_projections_in_l2_have_norm_one(seed in any::<u64>(), n in 2usize..7) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = Arc::new(NormedSpace::l2(n));
        let k = 1 + (seed as usize) % (n - 1);
        let y = Subspace::new(s.clone(), Matrix::from_fn(n, k, |_, _| gaussian(&mut r)), "Y").unwrap();
        let full = Subspace::full(s.clone());
        let ker = Subspace::new(s, y.complement_basis(), "K").unwrap();
        let p = make_projection(&full, &y, &ker).unwrap();
        prop_assert!((p.norm(&NormOptions::default()).unwrap().value - 1.0).abs() <= 1e-9);
        let q = orthogonal_projection(&full, &y).unwrap();
        prop_assert!((p.matrix() - q.matrix()).amax() <= 1e-10);
    }

    #[test]
    fn factors_compose_back(seed in 0u64..10_000) {
        let (_, x2, _, p) = instances::random_triple(seed, 8, 6).unwrap();
        let (p1, p2) = factor_through(&p, &x2).unwrap();
        prop_assert!((p.matrix() - p1.matrix() * p2.matrix()).amax() <= 1e-8);
        prop_assert!(p1.idempotence_residual() <= 1e-9 && p2.idempotence_residual() <= 1e-9);
        prop_assert!(p2.image().same_as(&x2));
        prop_assert!(p1.image().same_as(p.image()));
    }
}

#[test]
fn projections_reject_bad_matrices() {
    let s = Arc::new(NormedSpace::linf(3));
    let full = Subspace::full(s.clone());
    let y = Subspace::new(s, Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), "Y").unwrap();
    // not idempotent
    assert!(Projection::new(full.clone(), y.clone(), Matrix::identity(3, 3) * 2.0).is_err());
    // wrong image
    let mut m = Matrix::zeros(3, 3);
    m[(1, 1)] = 1.0;
    assert!(Projection::new(full, y, m).is_err());
}

#[test]
fn coordinate_chains_stay_at_one() {
    let o = NormOptions::default();
    for n in 2..=6 {
        let t = composition_table(&instances::coordinate_chain(n, n).unwrap(), &o).unwrap();
        assert!((t.sup - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn blowup_search_never_loses_to_the_default() {
    let chain = instances::gamma_chain(6, 0.9, 6).unwrap();
    let b = minimize_chain_blowup(
        &chain,
        &BlowupOptions {
            sweeps: 3,
            ..BlowupOptions::default()
        },
    )
    .unwrap();
    assert!(b.sup <= b.default_sup + 1e-9);
    let again = composition_table(&b.chain, &NormOptions::default()).unwrap();
    assert!((again.sup - b.sup).abs() <= 1e-6);
}

#[test]
fn table_csv_has_one_row_per_pair() {
    let t = composition_table(&instances::coordinate_chain(4, 4).unwrap(), &NormOptions::default()).unwrap();
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 1 + t.entries.len());
    assert!(csv.lines().next().unwrap().starts_with("k,l,"));
}
