//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line to stderr
//! (uncaptured) and then asserts.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use projlab::cli::{self, ExperimentConfig, Family, Kind};
use projlab::enlargements::{
    contains_image, example_experiment, l1_sum_construction, sqrt2_bound_check, Enlargement, MinimalRealizer,
};
use projlab::fdd::{
    blocking_step, commuting_construction, perturb_decomposition, random_perturbations, OuterChoice,
};
use projlab::instances;
use projlab::minproj::{lambda_relative, minimal_projection, MinProjOptions};
use projlab::projections::{composition_table, factor_through};
use projlab::spaces::{restricted_norm, NormOptions};
use projlab::{Error, NormedSpace, Subspace};

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = pass && elapsed <= limit;
    let line = format!(
        "acceptance {id:>2} [{}] {name}: {detail} ({:.1}s of {:.0}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(elapsed <= limit, "criterion {id} over its time limit");
}

// ---------------------------------------------------------------------------
// 1. LP optimum against a brute-force grid

/// Vertices of `{x : |f.x| <= 1 for all f}` by brute force over `n`-subsets
/// of the constraints (n = 2 or 3).
fn oracle_vertices(facets: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let mut rows = Vec::new();
    for f in facets {
        rows.push(f.clone());
        rows.push(-f.clone());
    }
    let mut out: Vec<DVector<f64>> = Vec::new();
    let m = rows.len();
    let mut push = |a: DMatrix<f64>| {
        let Some(inv) = a.clone().try_inverse() else { return };
        if a.determinant().abs() < 1e-10 {
            return;
        }
        let x = inv * DVector::from_element(n, 1.0);
        if facets.iter().all(|f| f.dot(&x).abs() <= 1.0 + 1e-9) && !out.iter().any(|v| (v - &x).amax() < 1e-9) {
            out.push(x);
        }
    };
    for i in 0..m {
        for j in i + 1..m {
            if n == 2 {
                push(DMatrix::from_rows(&[rows[i].transpose(), rows[j].transpose()]));
            } else {
                for k in j + 1..m {
                    push(DMatrix::from_rows(&[rows[i].transpose(), rows[j].transpose(), rows[k].transpose()]));
                }
            }
        }
    }
    out
}

struct Oracle {
    facets: Vec<DVector<f64>>,
    vertices: Vec<DVector<f64>>,
    /// `P(g) = base + left * g * right`, with `g` of shape `k x (n-k)`.
    base: DMatrix<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl Oracle {
    fn new(facets: Vec<DVector<f64>>, y: &DMatrix<f64>) -> Self {
        let n = y.nrows();
        let vertices = oracle_vertices(&facets, n);
        let pinv = (y.transpose() * y).try_inverse().unwrap() * y.transpose();
        // orthonormal complement of span(y) by Gram-Schmidt over e_1..e_n
        let q = y.clone().qr().q();
        let mut comp: Vec<DVector<f64>> = Vec::new();
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            for c in q.column_iter() {
                let c: DVector<f64> = c.into();
                e -= &c * c.dot(&e);
            }
            for c in &comp {
                e -= c * c.dot(&e);
            }
            if e.norm() > 1e-6 {
                comp.push(e.normalize());
            }
        }
        let c = DMatrix::from_columns(&comp);
        Oracle {
            facets,
            vertices,
            base: y * &pinv,
            left: y.clone(),
            right: c.transpose(),
        }
    }

    fn norm(&self, g: &[f64]) -> f64 {
        let k = self.left.ncols();
        let gm = DMatrix::from_row_slice(k, g.len() / k, g);
        let p = &self.base + &self.left * gm * &self.right;
        let mut best: f64 = 0.0;
        for v in &self.vertices {
            let pv = &p * v;
            for f in &self.facets {
                best = best.max(f.dot(&pv).abs());
            }
        }
        best
    }

    /// Grid with step `1e-2` on `[-4, 4]^q`, then nested local grids down to
    /// step `1e-4` around the incumbent.
    fn minimum(&self) -> f64 {
        let q = self.left.ncols() * self.right.nrows();
        let grid = |center: &[f64], h: f64, half: i32| -> (f64, Vec<f64>) {
            let mut best = (f64::INFINITY, center.to_vec());
            let offs: Vec<f64> = (-half..=half).map(|i| i as f64 * h).collect();
            let mut visit = |g: Vec<f64>| {
                let v = self.norm(&g);
                if v < best.0 {
                    best = (v, g);
                }
            };
            if q == 1 {
                for &a in &offs {
                    visit(vec![center[0] + a]);
                }
            } else {
                for &a in &offs {
                    for &b in &offs {
                        visit(vec![center[0] + a, center[1] + b]);
                    }
                }
            }
            best
        };
        let (mut val, mut g) = grid(&vec![0.0; q], 1e-2, 400);
        for h in [1e-3, 1e-4] {
            // recentre until the incumbent is interior at this resolution
            loop {
                let (v, c) = grid(&g, h, 20);
                let moved = v < val - 1e-15;
                val = val.min(v);
                g = c;
                if !moved {
                    break;
                }
            }
        }
        val
    }
}

#[test]
fn c01_lp_matches_grid_oracle() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = if seed % 2 == 0 { 2 } else { 3 };
        let k = if n == 2 || seed % 4 == 1 { 1 } else { 2 };
        let count = n + r.random_range(1..=3);
        let facets: Vec<DVector<f64>> = (0..count)
            .map(|_| DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0)))
            .collect();
        let y = DMatrix::from_fn(n, k, |_, _| r.random_range(-1.0..1.0));
        let both: Vec<DVector<f64>> = facets.iter().flat_map(|f| [f.clone(), -f.clone()]).collect();
        let space = Arc::new(NormedSpace::from_facets(both).unwrap());
        let sub = Subspace::new(space, y.clone(), "Y").unwrap();
        let lp = lambda_relative(&sub, 0.05).unwrap();
        let oracle = Oracle::new(facets, &y).minimum();
        let gap = (lp.lambda - oracle).abs();
        worst = worst.max(gap);
        if gap > 1e-3 {
            failures.push((seed, lp.lambda, oracle));
        }
    }
    report(
        1,
        "LP optimum vs grid oracle",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(60),
        &format!("50 instances, worst gap {worst:.2e}, failures {failures:?}"),
    );
}

// ---------------------------------------------------------------------------
// 2. trivial constants

#[test]
fn c02_trivial_constants() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let s = Arc::new(NormedSpace::linf(n));
        let full = Subspace::full(s.clone());
        worst = worst.max((lambda_relative(&full, 0.05).unwrap().lambda - 1.0).abs());
        for k in 1..n {
            let e = DMatrix::identity(n, n).columns(0, k).into_owned();
            let y = Subspace::new(s.clone(), e, "Y").unwrap();
            worst = worst.max((lambda_relative(&y, 0.05).unwrap().lambda - 1.0).abs());
        }
    }
    for n in 2..=4 {
        for space in [NormedSpace::l1(n), NormedSpace::l2(n)] {
            let full = Subspace::full(Arc::new(space));
            worst = worst.max((lambda_relative(&full, 0.05).unwrap().lambda - 1.0).abs());
        }
    }
    report(
        2,
        "trivial constants",
        worst <= 1e-6,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("max |lambda - 1| = {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 3. commuting construction

#[test]
fn c03_commuting_construction() {
    let start = Instant::now();
    let o = NormOptions::default();
    let mut worst = [0.0f64; 5];
    let mut excess = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let s = match instances::random_interlaced(seed, 10, OuterChoice::Orthogonal, &o) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        assert!(s.decomposition.ambient().dim() <= 10);
        match commuting_construction(&s, &o) {
            Ok(c) => {
                let cert = &c.certificates;
                let idem = c.projections.iter().map(|p| p.idempotence_residual()).fold(0.0, f64::max);
                let vals = [
                    idem,
                    cert.fixes_image.max(cert.image_inclusion),
                    cert.next_law,
                    cert.pairwise_law,
                    cert.idempotence,
                ];
                for (w, v) in worst.iter_mut().zip(vals) {
                    *w = w.max(v);
                }
                excess = excess.max(cert.bound_excess);
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let pass = failures.is_empty() && worst.iter().all(|&w| w <= 1e-9) && excess <= 1e-6;
    report(
        3,
        "commuting construction",
        pass,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "100 systems, idempotence {:.1e}, image {:.1e}, next law {:.1e}, pairwise law {:.1e}, norm-bound excess {excess:.2e}, failures {failures:?}",
            worst[0].max(worst[4]),
            worst[1],
            worst[2],
            worst[3]
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. factorization

#[test]
fn c04_factorization() {
    let start = Instant::now();
    let o = NormOptions::default();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let (_, x2, _, p) = instances::random_triple(seed, 8, 6).unwrap();
        let (p1, p2) = match factor_through(&p, &x2) {
            Ok(f) => f,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let diff = p.matrix() - p1.matrix() * p2.matrix();
        let res = restricted_norm(&diff, p.domain(), p.domain().ambient(), &o).unwrap().value;
        worst = worst.max(res);
        let certified = p1.idempotence_residual() <= 1e-9
            && p2.idempotence_residual() <= 1e-9
            && p1.image_residual() <= 1e-9
            && p2.image_residual() <= 1e-9;
        let ker1 = p1.kernel().unwrap();
        let expected = p.kernel().unwrap().intersection(&x2).unwrap();
        let kernel_ok = ker1.dim() == expected.dim() && ker1.contains(&expected) && expected.contains(&ker1);
        if res > 1e-8 || !certified || !kernel_ok {
            failures.push(format!("seed {seed}: residual {res:.1e}, certified {certified}, kernel {kernel_ok}"));
        }
    }
    report(
        4,
        "factorization through X2",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(60),
        &format!("200 triples, max ||P - P1 P2|| = {worst:.2e}, failures {failures:?}"),
    );
}

// ---------------------------------------------------------------------------
// 5. blocking

#[test]
fn c05_blocking() {
    let start = Instant::now();
    let o = NormOptions::default();
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    let mut golden_m = 0;
    for seed in 0..=50u64 {
        let (d, h, k, eps) = if seed == 0 {
            instances::golden_blocking(&o).unwrap()
        } else {
            instances::random_blocking(seed, &o).unwrap()
        };
        match blocking_step(&d, &h, k, eps, &o) {
            Ok(b) => {
                if seed == 0 {
                    golden_m = b.m;
                }
                worst[0] = worst[0].max(b.small_residual / eps);
                worst[1] = worst[1].max(b.span_residual);
                worst[2] = worst[2].max(b.fixed_residual);
                if b.small_residual > eps || b.span_residual > 1e-8 || b.fixed_residual > 1e-10 {
                    failures.push(format!("instance {seed}"));
                }
            }
            Err(e) => failures.push(format!("instance {seed}: {e}")),
        }
    }
    report(
        5,
        "blocking step",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "golden (m = {golden_m}) + 50 random, max residual/eps {:.3}, span {:.1e}, fixed {:.1e}, failures {failures:?}",
            worst[0], worst[1], worst[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. perturbation

#[test]
fn c06_perturbation() {
    let start = Instant::now();
    let o = NormOptions::default();
    let mut accepted = 0;
    let mut refused = 0;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = r.random_range(3..=6);
        let d = instances::random_decomposition(&mut r, Arc::new(NormedSpace::linf(n)), &vec![1; n], 0.3, &o).unwrap();
        let bound = 1.0 / (2.0 * d.constant());
        // half the instances below the hypothesis, half above
        let frac = if seed % 2 == 0 { r.random_range(0.05..0.95) } else { r.random_range(1.05..1.5) };
        let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        let eps: Vec<f64> = weights.iter().map(|w| w / total * frac * bound).collect();
        let sum_ok = eps.iter().sum::<f64>() < bound;
        let es = random_perturbations(&d, &eps, seed, &o).unwrap();
        match perturb_decomposition(&d, &es, Some(&eps), &o) {
            Ok(p) => {
                accepted += 1;
                let full_rank = p.decomposition.blocks().iter().zip(d.blocks()).all(|(a, b)| a.dim() == b.dim());
                if !sum_ok || !full_rank || !p.decomposition.constant().is_finite() {
                    failures.push(format!("seed {seed}: accepted with sum ok = {sum_ok}"));
                }
            }
            Err(Error::PerturbationHypothesis { .. }) => {
                refused += 1;
                if sum_ok {
                    failures.push(format!("seed {seed}: refused below the bound"));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    report(
        6,
        "perturbation of decompositions",
        failures.is_empty() && accepted == 50 && refused == 50,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("{accepted} accepted, {refused} refused, failures {failures:?}"),
    );
}

// ---------------------------------------------------------------------------
// 7. direct-sum pipeline

fn direct_sum_case(z: &Subspace, x: &Subspace, y: &Subspace, mp: &MinProjOptions) -> (f64, f64) {
    let lx = minimal_projection(z, x, Some(y), mp).unwrap().lambda;
    let ly = minimal_projection(z, y, Some(x), mp).unwrap().lambda;
    let ax = Enlargement::ball(x, lx).unwrap();
    let ay = Enlargement::ball(y, ly).unwrap();
    let sum = l1_sum_construction(x, y, z, &ax, &ay, &MinimalRealizer(*mp)).unwrap();
    let c = contains_image(&sum.projection, &ax.sum(&ay).unwrap(), &mp.minmax.norm).unwrap();
    (sum.identity_residual, c.margin)
}

#[test]
fn c07_direct_sum_pipeline() {
    let start = Instant::now();
    let mp = MinProjOptions::default();
    let (z, x, y) = instances::coordinate_pair(4, 2).unwrap();
    let (id1, m1) = direct_sum_case(&z, &x, &y, &mp);
    let (z, x, y) = instances::embedded_euclidean_pair(8).unwrap();
    assert!(z.ambient_dim() <= 16);
    let (id2, m2) = direct_sum_case(&z, &x, &y, &mp);
    report(
        7,
        "direct-sum projection pipeline",
        id1 <= 1e-9 && id2 <= 1e-9 && m1 >= -1e-8 && m2 >= -1e-8,
        start.elapsed(),
        Duration::from_secs(120),
        &format!("coordinate: id {id1:.1e}, margin {m1:.4}; euclidean: id {id2:.1e}, margin {m2:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 8. sqrt 2 inequality

#[test]
fn c08_sqrt2_inequality() {
    let start = Instant::now();
    let mp = MinProjOptions::default();
    let mut rows = Vec::new();
    let mut pass = true;
    for (k, n) in [(1, 2), (1, 3), (2, 3), (2, 4)] {
        let r = sqrt2_bound_check(k, n, 64, 1e-3, &mp).unwrap();
        let lhs = (r.lambda_k.powi(2) + r.lambda_n_minus_k.powi(2)).sqrt();
        let rhs = 2f64.sqrt() * r.lambda_n;
        let ok = lhs < rhs && r.p2_norm <= lhs + 1e-3;
        pass &= ok;
        rows.push(format!("({k},{n}) slack {:.4} p2 {:.4} <= {:.4}", rhs - lhs, r.p2_norm, lhs + 1e-3));
    }
    report(
        8,
        "sqrt 2 inequality",
        pass,
        start.elapsed(),
        Duration::from_secs(600),
        &rows.join("; "),
    );
}

// ---------------------------------------------------------------------------
// 9. composition far from minimal

/// `||P1 P2||` at `(k, n, m) = (1, 3, 64)`, pinned after the first certified run.
const GOLDEN_GAP: f64 = 1.501318487;

#[test]
fn c09_composition_gap() {
    let start = Instant::now();
    let mp = MinProjOptions {
        tau: 0.01,
        ..MinProjOptions::default()
    };
    let r = example_experiment(1, 3, 64, &mp).unwrap();
    let floor = r.lambda_n * (1.0 - r.eta) * 0.98;
    let pinned = (r.composite_norm - GOLDEN_GAP).abs() <= 1e-6;
    report(
        9,
        "composition far from minimal",
        r.composite_norm >= floor && floor > r.lambda_k && (r.lambda_k - 1.0).abs() <= 1e-6 && pinned,
        start.elapsed(),
        Duration::from_secs(300),
        &format!(
            "||P1 P2|| = {:.9} >= {floor:.6} > lambda_1 = {:.6} (lambda_3 = {:.6}, eta = {:.4}, p2 = {:.6})",
            r.composite_norm, r.lambda_k, r.lambda_n, r.eta, r.p2_norm
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. chain growth

/// Composition-table sup of the `γ = 0.9` chain in `l_inf^8` for `L = 2..8`.
const GOLDEN_CHAIN: [f64; 7] = [1.0017, 1.0224, 1.3343, 1.3640, 1.5100, 1.5874, 1.7946];

#[test]
fn c10_chain_growth() {
    let start = Instant::now();
    let o = NormOptions::default();
    let full = instances::gamma_chain(8, 0.9, 8).unwrap();
    let sups: Vec<f64> = (2..=8)
        .map(|l| composition_table(&full.truncate(l), &o).unwrap().sup)
        .collect();
    let increasing = sups.windows(2).all(|w| w[1] > w[0]);
    let ratio = sups[6] / sups[0];
    let golden = sups.iter().zip(GOLDEN_CHAIN).all(|(a, b)| (a - b).abs() <= 1e-4);
    let mut coord: f64 = 0.0;
    for n in 2..=8 {
        let c = instances::coordinate_chain(n, n).unwrap();
        coord = coord.max((composition_table(&c, &o).unwrap().sup - 1.0).abs());
    }
    report(
        10,
        "chain growth vs coordinate chains",
        increasing && ratio >= 1.05 && golden && coord <= 1e-9,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "sups {:?}, ratio {ratio:.4}, coordinate deviation {coord:.1e}",
            sups.iter().map(|s| (s * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. determinism

fn suite() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    let mut push = |kind: Kind, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = ExperimentConfig::new(kind);
        c.params.seed = 7;
        f(&mut c);
        out.push(c);
    };
    push(Kind::Minproj, &|c| {
        c.inputs.space = Some(cli::Source::Inline(projlab::io::SpaceSpec::lp(3, 1.0)));
        c.inputs.subspace = Some(cli::Source::Inline(projlab::io::SubspaceSpec {
            basis: vec![vec![1.0, 1.0, 0.0]],
            label: None,
        }));
    });
    push(Kind::Minproj, &|c| {
        c.inputs.space = Some(cli::Source::Inline(projlab::io::SpaceSpec::lp(2, 2.0)));
        c.params.m_list = vec![8, 16];
    });
    push(Kind::Chain, &|c| {
        c.params.length = 4;
        c.params.minimize = true;
        c.params.sweeps = 5;
    });
    push(Kind::Factor, &|c| c.inputs.preset = Some("random".into()));
    push(Kind::Constant, &|c| c.inputs.preset = Some("random".into()));
    push(Kind::Perturb, &|c| c.inputs.preset = Some("random".into()));
    push(Kind::Blocking, &|c| c.inputs.preset = Some("random".into()));
    push(Kind::Commute, &|c| {
        c.inputs.preset = Some("random".into());
        c.params.n = 8;
    });
    push(Kind::Limit, &|c| c.params.length = 5);
    push(Kind::Enlargement, &|c| {
        c.inputs.preset = Some("coordinate_pair".into());
        c.params.n = 4;
        c.params.k = 2;
    });
    push(Kind::Sqrt2, &|c| {
        c.params.pairs = vec![(1, 2)];
        c.params.m = Some(16);
    });
    push(Kind::TripleSearch, &|c| {
        c.params.family = Family::Random {
            ambient: 4,
            dims: (1, 2, 4),
            count: 5,
        };
    });
    out
}

#[test]
fn c11_determinism() {
    let start = Instant::now();
    let configs = suite();
    let first: Vec<String> = configs.iter().map(|c| cli::run(c, Path::new(".")).to_json()).collect();
    let second: Vec<String> = configs.iter().map(|c| cli::run(c, Path::new(".")).to_json()).collect();
    let differing: Vec<usize> = (0..configs.len()).filter(|&i| first[i] != second[i]).collect();
    let failing: Vec<String> = configs
        .iter()
        .zip(&first)
        .filter(|(_, r)| !r.contains("\"ok\": true"))
        .map(|(c, _)| format!("{:?}", c.kind))
        .collect();
    report(
        11,
        "deterministic reports",
        differing.is_empty() && failing.is_empty(),
        start.elapsed(),
        Duration::from_secs(1200),
        &format!("{} configs run twice, differing {differing:?}, not ok {failing:?}", configs.len()),
    );
}

