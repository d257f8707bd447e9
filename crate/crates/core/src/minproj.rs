//! Relative projection constants and minimal projections.
//!
//! Projections of a domain `D` onto `Y ⊂ D` that also kill a (possibly empty)
//! subspace `K` form the affine family `P0 + B G N'` with `B` an orthonormal
//! basis of `Y`, `N` one of the Euclidean complement of `Y + K` in `D`, and
//! `P0` the projection along `K + span N`. Minimizing `||P||` over `G` is a
//! single-term instance of [`crate::minmax`].

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::minmax::{minimize_max_norm, AffineTerm, MinMaxOptions};
use crate::polytope;
use crate::projections::{make_projection, Projection};
use crate::spaces::{gaussian, norm_pairs, NormKind, NormOptions, NormedSpace};
use crate::subspace::Subspace;
use crate::tol;

#[derive(Debug, Clone, Copy)]
pub struct MinProjOptions {
    /// Accepted relative gap for the iterative fallback.
    pub tau: f64,
    pub minmax: MinMaxOptions,
    pub subgradient_iterations: usize,
}

impl Default for MinProjOptions {
    fn default() -> Self {
        MinProjOptions {
            tau: 0.05,
            minmax: MinMaxOptions::default(),
            subgradient_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinProjCertificate {
    /// Exact optimum of the polyhedral LP.
    ExactLp,
    /// Cutting planes with exact (non-polyhedral) norms.
    CuttingPlane { lower: f64, upper: f64 },
    /// Subgradient descent on sampled norms.
    Subgradient { tau: f64, iterations: usize, lower: f64, upper: f64 },
}

#[derive(Debug, Clone)]
pub struct MinProjResult {
    pub lambda: f64,
    /// Certified lower bound on the constant.
    pub lower: f64,
    /// Relative gap `(lambda - lower) / lower`; zero for exact results.
    pub tau: f64,
    pub projection: Projection,
    pub certificate: MinProjCertificate,
    pub converged: bool,
}

/// The affine family of projections of `domain` onto `target` killing
/// `kernel`, in ambient coordinates.
pub struct ProjectionFamily {
    pub p0: Matrix,
    pub b: Matrix,
    pub nt: Matrix,
    pub domain: Subspace,
    pub target: Subspace,
}

impl ProjectionFamily {
    pub fn new(domain: &Subspace, target: &Subspace, kernel: Option<&Subspace>) -> Result<Self> {
        let amb = domain.ambient().clone();
        let kern = match kernel {
            Some(k) => k.clone(),
            None => Subspace::zero(amb.clone()),
        };
        let yk = linalg::hstack(&[target.basis(), kern.basis()]);
        let nb = linalg::relative_complement(&yk, domain.basis(), tol::RANK);
        let along = Subspace::new(amb.clone(), linalg::hstack(&[kern.basis(), &nb]), "")?;
        let p0 = make_projection(domain, target, &along)?;
        Ok(ProjectionFamily {
            p0: p0.matrix().clone(),
            b: target.orthonormal_basis(),
            nt: nb.transpose(),
            domain: domain.clone(),
            target: target.clone(),
        })
    }

    pub fn param_shape(&self) -> (usize, usize) {
        (self.b.ncols(), self.nt.nrows())
    }

    pub fn matrix(&self, g: &Matrix) -> Matrix {
        if g.nrows() == 0 || g.ncols() == 0 {
            return self.p0.clone();
        }
        &self.p0 + &self.b * g * &self.nt
    }

    /// `||P(G)||` as an affine term, in the domain frame.
    pub fn term(&self) -> Result<AffineTerm> {
        let (e, dom) = self.domain.frame()?;
        AffineTerm::new(
            &self.p0 * &e,
            self.b.clone(),
            &self.nt * &e,
            dom,
            self.domain.ambient().clone(),
        )
    }

    /// `G` such that `matrix(G)` agrees with `p` on the domain.
    pub fn params_of(&self, p: &Matrix) -> Matrix {
        let (k, q) = self.param_shape();
        if k == 0 || q == 0 {
            return Matrix::zeros(k, q);
        }
        let n = self.nt.transpose();
        self.b.transpose() * (p - &self.p0) * n
    }
}

/// `λ(Y, X)` for `Y` inside the whole ambient space.
pub fn lambda_relative(y: &Subspace, tau: f64) -> Result<MinProjResult> {
    let opts = MinProjOptions {
        tau,
        ..Default::default()
    };
    let x = Subspace::full(y.ambient().clone());
    minimal_projection(&x, y, None, &opts)
}

/// Minimal-norm projection of `domain` onto `target` whose kernel contains
/// `kernel`.
pub fn minimal_projection(
    domain: &Subspace,
    target: &Subspace,
    kernel: Option<&Subspace>,
    opts: &MinProjOptions,
) -> Result<MinProjResult> {
    if !(opts.tau > 0.0) {
        return Err(Error::Precondition(format!("tau must be positive, got {}", opts.tau)));
    }
    if !domain.contains(target) {
        return Err(Error::Inclusion("target is not inside the domain".into()));
    }
    let fam = ProjectionFamily::new(domain, target, kernel)?;
    let term = fam.term()?;
    let (k, q) = fam.param_shape();
    let g0 = Matrix::zeros(k, q);
    let polyhedral = term.domain.is_polyhedral() && term.codomain.is_polyhedral();
    let probe = norm_pairs(&term.eval(&g0), &term.domain, &term.codomain, &opts.minmax.norm, f64::INFINITY, 0)?.0;
    let floor = if target.dim() == 0 { 0.0 } else { 1.0 };
    if !probe.is_exact() {
        return subgradient(&fam, &term, floor, opts);
    }
    let r = minimize_max_norm(std::slice::from_ref(&term), &g0, &opts.minmax)?;
    let lower = r.lower.max(floor).min(r.value);
    let p = Projection::new(domain.clone(), target.clone(), fam.matrix(&r.g))?;
    let gap = if lower > 0.0 { (r.value - lower) / lower } else { 0.0 };
    let certificate = if polyhedral && r.converged && r.exact_norms {
        MinProjCertificate::ExactLp
    } else {
        MinProjCertificate::CuttingPlane {
            lower,
            upper: r.value,
        }
    };
    Ok(MinProjResult {
        lambda: r.value,
        lower,
        tau: if certificate == MinProjCertificate::ExactLp { 0.0 } else { gap },
        projection: p,
        certificate,
        converged: r.converged || gap <= opts.tau,
    })
}

/// Projected subgradient with steps `c / sqrt(t)` on the sampled norm; only
/// used when no exact norm strategy exists.
fn subgradient(fam: &ProjectionFamily, term: &AffineTerm, floor: f64, opts: &MinProjOptions) -> Result<MinProjResult> {
    let (k, q) = fam.param_shape();
    let inner = NormOptions {
        samples: 256,
        ..opts.minmax.norm
    };
    let mut g = Matrix::zeros(k, q);
    let eval = |g: &Matrix, o: &NormOptions| norm_pairs(&term.eval(g), &term.domain, &term.codomain, o, f64::INFINITY, 0).map(|r| r.0);
    let start = eval(&g, &inner)?;
    let c = start.value.max(1e-12);
    let mut best = (start.value, g.clone());
    let mut iterations = 0;
    for t in 1..=opts.subgradient_iterations {
        iterations = t;
        if k == 0 || q == 0 {
            break;
        }
        let on = eval(&g, &inner)?;
        if on.value < best.0 {
            best = (on.value, g.clone());
        }
        if floor > 0.0 && (best.0 - floor) / floor <= opts.tau {
            break;
        }
        let lf = term.left.tr_mul(&on.functional);
        let rv = &term.right * &on.witness;
        let grad = &lf * rv.transpose();
        let gn = grad.norm();
        if gn == 0.0 {
            break;
        }
        g -= grad * (c / (gn * (t as f64).sqrt()));
    }
    let fin = eval(&best.1, &opts.minmax.norm)?;
    // ||P|| >= 1 for every projection onto a nonzero subspace
    let achieved = fin.value.max(floor);
    let upper = match fin.certificate {
        crate::spaces::NormCertificate::Bracket { upper, .. } => upper.max(achieved),
        crate::spaces::NormCertificate::Exact => achieved,
    };
    let lower = floor;
    let gap = if lower > 0.0 { (achieved - lower) / lower } else { 0.0 };
    let p = Projection::new(fam.domain.clone(), fam.target.clone(), fam.matrix(&best.1))?;
    Ok(MinProjResult {
        lambda: achieved,
        lower,
        tau: gap,
        projection: p,
        certificate: MinProjCertificate::Subgradient {
            tau: opts.tau,
            iterations,
            lower,
            upper,
        },
        converged: gap <= opts.tau,
    })
}

// ---------------------------------------------------------------------------
// embeddings into l_inf^m

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seed", rename_all = "snake_case")]
pub enum EmbedScheme {
    /// Equal angles in dimension 2, a spiral in dimension 3, greedy spread
    /// points from a fixed pool above.
    Grid,
    /// Seeded directions (reflection-symmetric in every dimension).
    Seeded(u64),
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub ambient: Arc<NormedSpace>,
    /// Image of `Y`; its basis matrix has the functionals as rows.
    pub copy: Subspace,
    pub functionals: Vec<Vector>,
    /// `(1 - eta) ||y|| <= max_i |f_i(y)| <= ||y||`.
    pub eta: f64,
    /// `eta` is exact (vertex enumeration) rather than sampled.
    pub eta_exact: bool,
}

/// Extreme points of the dual ball up to sign, when finitely many.
fn half_facets(y: &NormedSpace) -> Option<Vec<Vector>> {
    let d = y.dim();
    let all: Vec<Vector> = match y.kind() {
        NormKind::Lp(p) if p.is_infinite() => (0..d)
            .map(|i| {
                let mut e = Vector::zeros(d);
                e[i] = 1.0;
                e
            })
            .collect(),
        NormKind::Lp(p) if *p == 1.0 && d <= 12 => {
            let mut out = Vec::new();
            crate::spaces::Extremes::Signs(d).for_each(|s| out.push(s.clone()));
            out
        }
        _ => {
            let fs = y.ball_facets()?;
            let mut out: Vec<Vector> = Vec::new();
            for f in fs {
                if !out.iter().any(|g| (g + f).amax() <= 1e-12 || (g - f).amax() <= 1e-12) {
                    out.push(f.clone());
                }
            }
            out
        }
    };
    Some(all)
}

fn orthant_points(d: usize, count: usize, scheme: EmbedScheme) -> Vec<Vector> {
    if d == 3 && scheme == EmbedScheme::Grid {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        return (0..count)
            .map(|i| {
                let z = (i as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = 0.5 * PI * ((i as f64 * golden) % 1.0);
                Vector::from_column_slice(&[r * phi.cos(), r * phi.sin(), z])
            })
            .collect();
    }
    let seed = match scheme {
        EmbedScheme::Grid => 0,
        EmbedScheme::Seeded(s) => s,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool_size = (64 * count).max(2000);
    let pool: Vec<Vector> = (0..pool_size)
        .map(|_| {
            let v = Vector::from_fn(d, |_, _| gaussian(&mut rng).abs());
            let n = v.norm();
            v / n
        })
        .collect();
    // greedy farthest-point selection, starting from the diagonal
    let mut chosen = vec![Vector::from_element(d, 1.0 / (d as f64).sqrt())];
    let mut dist: Vec<f64> = pool.iter().map(|p| (p - &chosen[0]).norm()).collect();
    while chosen.len() < count {
        let (i, _) = dist
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        let c = pool[i].clone();
        for (j, p) in pool.iter().enumerate() {
            dist[j] = dist[j].min((p - &c).norm());
        }
        chosen.push(c);
    }
    chosen
}

fn directions(d: usize, m: usize, scheme: EmbedScheme) -> Vec<Vector> {
    match d {
        1 => vec![Vector::from_element(1, 1.0)],
        2 => {
            let offset = match scheme {
                EmbedScheme::Grid => 0.0,
                EmbedScheme::Seeded(s) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    use rand::Rng;
                    rng.random::<f64>() * 2.0 * PI / m as f64
                }
            };
            (0..m)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / m as f64 + offset;
                    Vector::from_column_slice(&[t.cos(), t.sin()])
                })
                .collect()
        }
        _ => {
            let patterns = 1usize << (d - 1);
            let count = (m / patterns).max(1);
            let base = orthant_points(d, count, scheme);
            let mut out = Vec::with_capacity(count * patterns);
            for b in &base {
                for mask in 0..patterns {
                    let mut v = b.clone();
                    for i in 1..d {
                        if mask >> (i - 1) & 1 == 1 {
                            v[i] = -v[i];
                        }
                    }
                    out.push(v);
                }
            }
            out
        }
    }
}

/// Embeds `y` into `l_inf^m` through `m` functionals of dual norm one.
pub fn embed_into_linf(y: &NormedSpace, m: usize, scheme: EmbedScheme) -> Result<Embedding> {
    let d = y.dim();
    if m < d {
        return Err(Error::Precondition(format!("m = {m} is smaller than dim Y = {d}")));
    }
    let mut fs: Vec<Vector> = match half_facets(y) {
        Some(h) if h.len() <= m => h,
        _ => {
            let dirs = directions(d, m, scheme);
            let mut out = Vec::with_capacity(dirs.len());
            for u in dirs {
                let (dn, _) = y.dual_norm(&u)?;
                out.push(u / dn);
            }
            out
        }
    };
    fs.truncate(m);
    // pad by repeating; duplicate coordinates do not change the norm
    let base = fs.len();
    for i in 0..m.saturating_sub(base) {
        fs.push(fs[i % base].clone());
    }
    let ambient = Arc::new(NormedSpace::linf(m));
    let f = Matrix::from_fn(m, d, |i, j| fs[i][j]);
    if linalg::rank(&f, tol::RANK) < d {
        return Err(Error::Precondition(format!("m = {m} functionals do not separate points")));
    }
    let copy = Subspace::new(ambient.clone(), f, format!("copy of {}", y.label()))?;
    let (eta, eta_exact) = distortion(y, &fs)?;
    Ok(Embedding {
        ambient,
        copy,
        functionals: fs,
        eta,
        eta_exact,
    })
}

/// `eta = 1 - min_{||y|| = 1} max_i |f_i(y)|`, exact through the vertices of
/// `{max_i |f_i(y)| <= 1}` when the dimension allows, sampled otherwise.
fn distortion(y: &NormedSpace, fs: &[Vector]) -> Result<(f64, bool)> {
    let d = y.dim();
    let n_of = |v: &Vector| fs.iter().map(|f| f.dot(v).abs()).fold(0.0, f64::max);
    if d <= tol::CONVERSION_CAP {
        let mut facets = Vec::with_capacity(2 * fs.len());
        for f in fs {
            facets.push(f.clone());
            facets.push(-f);
        }
        let verts = polytope::vertices_from_facets(&facets, d);
        if let Ok(vs) = verts {
            let mut worst = 0.0_f64;
            for v in &vs {
                worst = worst.max(y.norm(v)?);
            }
            return Ok(((1.0 - 1.0 / worst).max(0.0), true));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = 1.0_f64;
    for _ in 0..10_000 {
        let v = y.sample_sphere(&mut rng)?;
        worst = worst.min(n_of(&v));
    }
    Ok(((1.0 - worst).max(0.0), false))
}

#[derive(Debug, Clone)]
pub struct AbsoluteEstimate {
    pub m: usize,
    pub eta: f64,
    pub eta_exact: bool,
    pub result: MinProjResult,
}

/// `λ(Y, l_inf^m)` along a list of resolutions.
pub fn lambda_absolute_approx(
    y: &NormedSpace,
    m_list: &[usize],
    scheme: EmbedScheme,
    opts: &MinProjOptions,
) -> Result<Vec<AbsoluteEstimate>> {
    m_list
        .iter()
        .map(|&m| {
            let e = embed_into_linf(y, m, scheme)?;
            let full = Subspace::full(e.ambient.clone());
            let result = minimal_projection(&full, &e.copy, None, opts)?;
            Ok(AbsoluteEstimate {
                m,
                eta: e.eta,
                eta_exact: e.eta_exact,
                result,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn trivial_constants() {
        let s = Arc::new(NormedSpace::linf(3));
        let full = Subspace::full(s.clone());
        let r = lambda_relative(&full, 0.05).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-12);
        let e1 = Subspace::from_vectors(s.clone(), &[v(&[1.0, 0.0, 0.0])]).unwrap();
        let r = lambda_relative(&e1, 0.05).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-9);
        assert_eq!(r.certificate, MinProjCertificate::ExactLp);
        let s2 = Arc::new(NormedSpace::linf(2));
        let diag = Subspace::from_vectors(s2, &[v(&[1.0, 1.0])]).unwrap();
        assert!((lambda_relative(&diag, 0.05).unwrap().lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn euclidean_plane_in_l2_has_constant_one() {
        let s = Arc::new(NormedSpace::l2(3));
        let y = Subspace::from_vectors(s, &[v(&[1.0, 1.0, 0.0]), v(&[0.0, 1.0, 1.0])]).unwrap();
        let r = lambda_relative(&y, 0.05).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-6, "{}", r.lambda);
    }

    #[test]
    fn embedding_distortion_in_the_plane() {
        for m in [4usize, 32] {
            let e = embed_into_linf(&NormedSpace::l2(2), m, EmbedScheme::Grid).unwrap();
            let want = 1.0 - (PI / m as f64).cos();
            assert!(e.eta_exact);
            assert!((e.eta - want).abs() < 1e-12, "m={m}: {} vs {want}", e.eta);
        }
        let e = embed_into_linf(&NormedSpace::linf(3), 3, EmbedScheme::Grid).unwrap();
        assert!(e.eta.abs() < 1e-12);
    }

    #[test]
    fn regular_polygon_constant() {
        // the invariant projection is minimal for the regular 2m-gon:
        // (2/m) max_i sum_j |cos(theta_i - theta_j)|
        let m = 8;
        let e = embed_into_linf(&NormedSpace::l2(2), m, EmbedScheme::Grid).unwrap();
        let full = Subspace::full(e.ambient.clone());
        let r = minimal_projection(&full, &e.copy, None, &MinProjOptions::default()).unwrap();
        let th: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
        let want = th
            .iter()
            .map(|a| th.iter().map(|b| (a - b).cos().abs()).sum::<f64>())
            .fold(0.0, f64::max)
            * 2.0
            / m as f64;
        assert!((r.lambda - want).abs() < 1e-9, "{} vs {want}", r.lambda);
    }

    #[test]
    fn subgradient_fallback_for_lp3() {
        let s = Arc::new(NormedSpace::lp(3, 3.0).unwrap());
        let y = Subspace::from_vectors(s, &[v(&[1.0, 1.0, 1.0])]).unwrap();
        let opts = MinProjOptions {
            subgradient_iterations: 300,
            ..Default::default()
        };
        let full = Subspace::full(y.ambient().clone());
        let r = minimal_projection(&full, &y, None, &opts).unwrap();
        assert!(matches!(r.certificate, MinProjCertificate::Subgradient { .. }));
        assert!(r.lambda >= 1.0 - 1e-9);
    }
}
