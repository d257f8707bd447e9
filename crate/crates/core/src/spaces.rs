//! Finite-dimensional normed spaces.
//!
//! A [`NormedSpace`] is `R^dim` with one of four norms: an `l_p` norm, the
//! gauge of a symmetric polytope given by vertices, the max of a symmetric
//! list of functionals (facets), or a norm induced by an injective linear map
//! into another space. The last kind is how subspaces carry their norm in
//! basis coordinates.
//!
//! Besides `||x||` every space can produce a norming functional for `x`
//! (an element `f` of the dual ball with `f.x = ||x||`) and a maximizer of
//! `g.x` over its unit ball. Those two primitives drive the exact operator
//! norm strategies in [`operator_norm`] and the cutting planes in
//! [`crate::minmax`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::lp::{LinearProgram, Relation, VarBound};
use crate::polytope;
use crate::subspace::Subspace;
use crate::tol;

#[derive(Debug, Clone)]
pub enum NormKind {
    /// `p` in `[1, inf]`; `f64::INFINITY` for the max norm.
    Lp(f64),
    /// Gauge of the convex hull of a symmetric, spanning vertex list.
    Vertices(Vec<Vector>),
    /// `max_f f.x` over a symmetric, spanning list of functionals.
    Facets(Vec<Vector>),
    /// `||map x||_base` with `map` injective.
    Induced { base: Arc<NormedSpace>, map: Matrix },
}

#[derive(Debug, Clone)]
pub struct NormedSpace {
    dim: usize,
    kind: NormKind,
    label: String,
    // extreme points of the unit ball, when known
    vertices: Option<Vec<Vector>>,
    // extreme points of the dual ball, when known
    facets: Option<Vec<Vector>>,
}

fn is_symmetric(list: &[Vector]) -> bool {
    list.iter().all(|v| {
        let s = 1e-9 * (1.0 + v.amax());
        list.iter().any(|w| (v + w).amax() <= s)
    })
}

/// Drops zero functionals and, among parallel ones, keeps the longest.
fn dedupe_facets(list: Vec<Vector>) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(list.len());
    for f in list {
        let n = f.norm();
        if n <= 1e-14 {
            continue;
        }
        let dir = &f / n;
        let mut merged = false;
        for g in out.iter_mut() {
            let gn = g.norm();
            if (&dir - &*g / gn).amax() <= 1e-12 {
                if n > gn {
                    *g = f.clone();
                }
                merged = true;
                break;
            }
        }
        if !merged {
            out.push(f);
        }
    }
    out
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Extreme points of a unit ball or of a dual ball, up to sign.
#[derive(Debug, Clone, Copy)]
pub enum Extremes<'a> {
    /// All `{-1, 1}^n` vectors.
    Signs(usize),
    /// `+-e_i`.
    SignedBasis(usize),
    List(&'a [Vector]),
}

impl Extremes<'_> {
    /// Number of candidates after identifying `v` with `-v`.
    pub fn half_count(&self) -> f64 {
        match self {
            Extremes::Signs(n) => 2f64.powi(*n as i32 - 1),
            Extremes::SignedBasis(n) => *n as f64,
            Extremes::List(l) => l.len() as f64,
        }
    }

    /// Calls `f` once per candidate (up to sign for the closed forms).
    pub fn for_each(&self, mut f: impl FnMut(&Vector)) {
        match *self {
            Extremes::Signs(n) => {
                if n == 0 {
                    return;
                }
                let mut v = Vector::from_element(n, 1.0);
                for mask in 0u64..(1u64 << (n - 1)) {
                    for i in 1..n {
                        v[i] = if mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
                    }
                    f(&v);
                }
            }
            Extremes::SignedBasis(n) => {
                for i in 0..n {
                    let mut e = Vector::zeros(n);
                    e[i] = 1.0;
                    f(&e);
                }
            }
            Extremes::List(l) => {
                for v in l {
                    f(v);
                }
            }
        }
    }
}

impl NormedSpace {
    pub fn lp(dim: usize, p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidNorm(format!("p = {p} is not in [1, inf]")));
        }
        let label = if p.is_infinite() {
            format!("l_inf^{dim}")
        } else {
            format!("l_{p}^{dim}")
        };
        Ok(NormedSpace {
            dim,
            kind: NormKind::Lp(p),
            label,
            vertices: None,
            facets: None,
        })
    }

    pub fn linf(dim: usize) -> Self {
        Self::lp(dim, f64::INFINITY).expect("valid p")
    }

    pub fn l1(dim: usize) -> Self {
        Self::lp(dim, 1.0).expect("valid p")
    }

    pub fn l2(dim: usize) -> Self {
        Self::lp(dim, 2.0).expect("valid p")
    }

    pub fn from_vertices(vertices: Vec<Vector>) -> Result<Self> {
        let dim = Self::check_list(&vertices, "vertex")?;
        let facets = if dim <= tol::CONVERSION_CAP {
            Some(polytope::facets_from_vertices(&vertices, dim)?)
        } else {
            None
        };
        let space = NormedSpace {
            dim,
            label: format!("polytope[{} vertices]", vertices.len()),
            kind: NormKind::Vertices(vertices.clone()),
            vertices: Some(vertices),
            facets,
        };
        if space.facets.is_none() {
            // origin must be interior: every basis vector has a finite gauge
            for i in 0..dim {
                let mut e = Vector::zeros(dim);
                e[i] = 1.0;
                space.gauge_lp(&e)?;
            }
        }
        Ok(space)
    }

    pub fn from_facets(facets: Vec<Vector>) -> Result<Self> {
        let dim = Self::check_list(&facets, "facet")?;
        let facets = dedupe_facets(facets);
        let vertices = if dim <= tol::CONVERSION_CAP {
            match polytope::vertices_from_facets(&facets, dim) {
                Ok(v) => Some(v),
                Err(Error::EnumerationTooLarge(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(NormedSpace {
            dim,
            label: format!("polytope[{} facets]", facets.len()),
            kind: NormKind::Facets(facets.clone()),
            vertices,
            facets: Some(facets),
        })
    }

    fn check_list(list: &[Vector], what: &str) -> Result<usize> {
        let Some(first) = list.first() else {
            return Err(Error::InvalidNorm(format!("empty {what} list")));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidNorm("dimension must be positive".into()));
        }
        for v in list {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidNorm(format!("non-finite {what}")));
            }
        }
        if !is_symmetric(list) {
            return Err(Error::InvalidNorm(format!(
                "{what} list is not centrally symmetric"
            )));
        }
        let m = linalg::matrix_from_columns(list, dim);
        if linalg::rank(&m, tol::RANK) < dim {
            return Err(Error::InvalidNorm(format!("{what} list does not span")));
        }
        Ok(dim)
    }

    /// Norm `||map x||_base` on `R^k`, `k = map.ncols()`. Sections of max
    /// norms and of facet polytopes come back as facet polytopes, sections
    /// of Euclidean norms as a square triangular factor.
    pub fn induced(base: &Arc<NormedSpace>, map: Matrix) -> Result<Self> {
        if map.nrows() != base.dim {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                got: map.nrows(),
            });
        }
        let k = map.ncols();
        if linalg::rank(&map, tol::RANK) < k {
            return Err(Error::InvalidSubspace("induced map is not injective".into()));
        }
        let label = format!("section of {}", base.label);
        if k == 0 {
            return Ok(NormedSpace {
                dim: 0,
                kind: NormKind::Lp(f64::INFINITY),
                label,
                vertices: Some(vec![]),
                facets: Some(vec![]),
            });
        }
        let pulled = |fs: &[Vector]| -> Vec<Vector> {
            let mut out = Vec::with_capacity(fs.len());
            for f in fs {
                let g = map.tr_mul(f);
                out.push(g);
            }
            out
        };
        let mut space = match &base.kind {
            NormKind::Lp(p) if p.is_infinite() => {
                let mut rows = Vec::with_capacity(2 * map.nrows());
                for i in 0..map.nrows() {
                    let r = map.row(i).transpose();
                    rows.push(-&r);
                    rows.push(r);
                }
                Self::from_facets(dedupe_facets(rows))?
            }
            NormKind::Lp(p) if *p == 1.0 && base.dim <= 10 => {
                let mut fs = Vec::new();
                Extremes::Signs(base.dim).for_each(|s| {
                    let g = map.tr_mul(s);
                    fs.push(-&g);
                    fs.push(g);
                });
                Self::from_facets(dedupe_facets(fs))?
            }
            NormKind::Lp(p) if *p == 2.0 => {
                let r = map.clone().qr().r();
                NormedSpace {
                    dim: k,
                    kind: NormKind::Induced {
                        base: Arc::new(NormedSpace::l2(k)),
                        map: r,
                    },
                    label: label.clone(),
                    vertices: None,
                    facets: None,
                }
            }
            NormKind::Facets(fs) => {
                let mut g = pulled(fs);
                g.retain(|v| v.amax() > 0.0);
                Self::from_facets(dedupe_facets(g))?
            }
            NormKind::Vertices(_) if base.facets.is_some() => {
                let mut g = pulled(base.facets.as_ref().unwrap());
                let neg: Vec<Vector> = g.iter().map(|v| -v).collect();
                g.extend(neg);
                Self::from_facets(dedupe_facets(g))?
            }
            NormKind::Induced { base: b2, map: m2 } => {
                return Self::induced(b2, m2 * &map);
            }
            _ => NormedSpace {
                dim: k,
                kind: NormKind::Induced {
                    base: base.clone(),
                    map,
                },
                label: label.clone(),
                vertices: None,
                facets: None,
            },
        };
        space.label = label;
        Ok(space)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_polyhedral(&self) -> bool {
        match &self.kind {
            NormKind::Lp(p) => p.is_infinite() || *p == 1.0,
            NormKind::Vertices(_) | NormKind::Facets(_) => true,
            NormKind::Induced { base, .. } => base.is_polyhedral(),
        }
    }

    /// `R` with `||x|| = ||R x||_2` when the norm is Euclidean.
    pub fn euclidean_factor(&self) -> Option<Matrix> {
        match &self.kind {
            NormKind::Lp(p) if *p == 2.0 => Some(Matrix::identity(self.dim, self.dim)),
            NormKind::Induced { base, map } => base.euclidean_factor().map(|r| r * map),
            _ => None,
        }
    }

    /// Vertex list of the unit ball when one is stored.
    pub fn ball_vertices(&self) -> Option<&[Vector]> {
        self.vertices.as_deref()
    }

    /// Dual-ball extreme points (facet functionals) when stored.
    pub fn ball_facets(&self) -> Option<&[Vector]> {
        self.facets.as_deref()
    }

    pub fn ball_extremes(&self, cap: usize) -> Option<Extremes<'_>> {
        match &self.kind {
            NormKind::Lp(p) if p.is_infinite() && self.dim <= cap => Some(Extremes::Signs(self.dim)),
            NormKind::Lp(p) if *p == 1.0 => Some(Extremes::SignedBasis(self.dim)),
            _ => self.vertices.as_deref().map(Extremes::List),
        }
    }

    pub fn dual_extremes(&self, cap: usize) -> Option<Extremes<'_>> {
        match &self.kind {
            NormKind::Lp(p) if p.is_infinite() => Some(Extremes::SignedBasis(self.dim)),
            NormKind::Lp(p) if *p == 1.0 && self.dim <= cap => Some(Extremes::Signs(self.dim)),
            _ => self.facets.as_deref().map(Extremes::List),
        }
    }

    fn check_len(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        self.check_len(x)?;
        if self.dim == 0 {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            NormKind::Lp(p) => lp_norm(x, *p),
            NormKind::Facets(fs) => fs.iter().map(|f| f.dot(x)).fold(0.0, f64::max),
            NormKind::Vertices(_) => match &self.facets {
                Some(fs) => fs.iter().map(|f| f.dot(x)).fold(0.0, f64::max),
                None => self.gauge_lp(x)?.0,
            },
            NormKind::Induced { base, map } => base.norm(&(map * x))?,
        })
    }

    /// Gauge of a vertex polytope with its norming functional (LP duals).
    fn gauge_lp(&self, x: &Vector) -> Result<(f64, Vector)> {
        let NormKind::Vertices(vs) = &self.kind else {
            unreachable!("gauge_lp on a non-vertex space")
        };
        let n = vs.len();
        let mut lp = LinearProgram::new(vec![VarBound::NonNegative; n]);
        lp.minimize(vec![1.0; n]);
        for i in 0..self.dim {
            lp.add_row(vs.iter().map(|v| v[i]).collect(), Relation::Eq, x[i]);
        }
        let sol = lp.solve()?;
        Ok((sol.objective, Vector::from_vec(sol.duals)))
    }

    /// `(||x||, f)` with `f` in the dual ball and `f.x = ||x||`.
    pub fn norming_functional(&self, x: &Vector) -> Result<(f64, Vector)> {
        self.check_len(x)?;
        let n = self.dim;
        if n == 0 || x.amax() == 0.0 {
            return Ok((0.0, Vector::zeros(n)));
        }
        Ok(match &self.kind {
            NormKind::Lp(p) => {
                let p = *p;
                if p.is_infinite() {
                    let i = x.iamax();
                    let mut f = Vector::zeros(n);
                    f[i] = sign(x[i]);
                    (x[i].abs(), f)
                } else if p == 1.0 {
                    (x.lp_norm(1), x.map(sign))
                } else if p == 2.0 {
                    let v = x.norm();
                    (v, x / v)
                } else {
                    let v = lp_norm(x, p);
                    let f = x.map(|t| sign(t) * (t.abs() / v).powf(p - 1.0));
                    (v, f)
                }
            }
            NormKind::Facets(fs) => best_facet(fs, x),
            NormKind::Vertices(_) => match &self.facets {
                Some(fs) => best_facet(fs, x),
                None => self.gauge_lp(x)?,
            },
            NormKind::Induced { base, map } => {
                let (v, h) = base.norming_functional(&(map * x))?;
                (v, map.tr_mul(&h))
            }
        })
    }

    /// `(||g||_*, x)` with `||x|| <= 1` and `g.x = ||g||_*`.
    pub fn dual_norm(&self, g: &Vector) -> Result<(f64, Vector)> {
        self.check_len(g)?;
        let n = self.dim;
        if n == 0 {
            return Ok((0.0, Vector::zeros(0)));
        }
        Ok(match &self.kind {
            NormKind::Lp(p) => {
                let p = *p;
                if p.is_infinite() {
                    (g.lp_norm(1), g.map(sign))
                } else if p == 1.0 {
                    let i = g.iamax();
                    let mut x = Vector::zeros(n);
                    x[i] = sign(g[i]);
                    (g[i].abs(), x)
                } else if p == 2.0 {
                    let v = g.norm();
                    if v == 0.0 {
                        let mut x = Vector::zeros(n);
                        x[0] = 1.0;
                        (0.0, x)
                    } else {
                        (v, g / v)
                    }
                } else {
                    let q = p / (p - 1.0);
                    let v = lp_norm(g, q);
                    if v == 0.0 {
                        let mut x = Vector::zeros(n);
                        x[0] = 1.0;
                        (0.0, x)
                    } else {
                        (v, g.map(|t| sign(t) * (t.abs() / v).powf(q - 1.0)))
                    }
                }
            }
            NormKind::Vertices(vs) => best_vertex(vs, g),
            NormKind::Facets(fs) => match &self.vertices {
                Some(vs) => best_vertex(vs, g),
                None => facet_dual_lp(fs, g)?,
            },
            NormKind::Induced { base, map } => {
                if let Some(r) = self.euclidean_factor() {
                    // ||g||_* = ||R^{-T} g||_2 for square invertible R
                    let rt = r.transpose();
                    let h = rt
                        .lu()
                        .solve(g)
                        .ok_or_else(|| Error::InvalidNorm("singular Euclidean factor".into()))?;
                    let v = h.norm();
                    let y = if v > 0.0 { h / v } else { Vector::zeros(n) };
                    let x = r
                        .lu()
                        .solve(&y)
                        .ok_or_else(|| Error::InvalidNorm("singular Euclidean factor".into()))?;
                    (v, x)
                } else {
                    induced_dual_lp(base, map, g)?
                }
            }
        })
    }

    /// A point on the unit sphere drawn from a seeded Gaussian direction.
    pub fn sample_sphere(&self, rng: &mut ChaCha8Rng) -> Result<Vector> {
        loop {
            let v = Vector::from_fn(self.dim, |_, _| gaussian(rng));
            let n = self.norm(&v)?;
            if n > 1e-12 {
                return Ok(v / n);
            }
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            NormKind::Lp(p) if p.is_infinite() => "lp(inf)".into(),
            NormKind::Lp(p) => format!("lp({p})"),
            NormKind::Vertices(v) => format!("vertices({})", v.len()),
            NormKind::Facets(f) => format!("facets({})", f.len()),
            NormKind::Induced { base, .. } => format!("induced({})", base.describe()),
        }
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; keeps the stream independent of distribution crates
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn lp_norm(x: &Vector, p: f64) -> f64 {
    if p.is_infinite() {
        x.amax()
    } else if p == 1.0 {
        x.lp_norm(1)
    } else if p == 2.0 {
        x.norm()
    } else {
        let m = x.amax();
        if m == 0.0 {
            return 0.0;
        }
        m * x.iter().map(|t| (t.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn best_facet(fs: &[Vector], x: &Vector) -> (f64, Vector) {
    let mut best = (f64::MIN, 0usize);
    for (k, f) in fs.iter().enumerate() {
        let v = f.dot(x);
        if v > best.0 {
            best = (v, k);
        }
    }
    (best.0.max(0.0), fs[best.1].clone())
}

fn best_vertex(vs: &[Vector], g: &Vector) -> (f64, Vector) {
    let mut best = (f64::MIN, 0usize, 1.0);
    for (k, v) in vs.iter().enumerate() {
        let d = g.dot(v);
        if d.abs() > best.0 {
            best = (d.abs(), k, sign(d));
        }
    }
    (best.0, &vs[best.1] * best.2)
}

/// `max g.x  s.t.  f.x <= 1` for all facets.
fn facet_dual_lp(fs: &[Vector], g: &Vector) -> Result<(f64, Vector)> {
    let n = g.len();
    let mut lp = LinearProgram::new(vec![VarBound::Free; n]);
    lp.maximize(g.iter().cloned().collect());
    for f in fs {
        lp.add_row(f.iter().cloned().collect(), Relation::Le, 1.0);
    }
    let sol = lp.solve()?;
    Ok((sol.objective, Vector::from_vec(sol.x)))
}

/// `max g.x  s.t.  ||M x||_base <= 1` for polyhedral bases without a facet
/// list (l1 and vertex polytopes).
fn induced_dual_lp(base: &NormedSpace, map: &Matrix, g: &Vector) -> Result<(f64, Vector)> {
    let k = map.ncols();
    let n = map.nrows();
    match &base.kind {
        NormKind::Lp(p) if *p == 1.0 => {
            // vars: x (k free), s (n >= 0); s_i >= |(Mx)_i|, sum s <= 1
            let mut bounds = vec![VarBound::Free; k];
            bounds.extend(vec![VarBound::NonNegative; n]);
            let mut lp = LinearProgram::new(bounds);
            let mut c: Vec<f64> = g.iter().cloned().collect();
            c.extend(vec![0.0; n]);
            lp.maximize(c);
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut row = vec![0.0; k + n];
                    for j in 0..k {
                        row[j] = s * map[(i, j)];
                    }
                    row[k + i] = -1.0;
                    lp.add_row(row, Relation::Le, 0.0);
                }
            }
            let mut row = vec![0.0; k + n];
            for i in 0..n {
                row[k + i] = 1.0;
            }
            lp.add_row(row, Relation::Le, 1.0);
            let sol = lp.solve()?;
            Ok((sol.objective, Vector::from_column_slice(&sol.x[..k])))
        }
        NormKind::Vertices(vs) => {
            // vars: x (k free), mu (|V| >= 0); M x = sum mu v, sum mu <= 1
            let nv = vs.len();
            let mut bounds = vec![VarBound::Free; k];
            bounds.extend(vec![VarBound::NonNegative; nv]);
            let mut lp = LinearProgram::new(bounds);
            let mut c: Vec<f64> = g.iter().cloned().collect();
            c.extend(vec![0.0; nv]);
            lp.maximize(c);
            for i in 0..n {
                let mut row = vec![0.0; k + nv];
                for j in 0..k {
                    row[j] = map[(i, j)];
                }
                for (t, v) in vs.iter().enumerate() {
                    row[k + t] = -v[i];
                }
                lp.add_row(row, Relation::Eq, 0.0);
            }
            let mut row = vec![0.0; k + nv];
            for t in 0..nv {
                row[k + t] = 1.0;
            }
            lp.add_row(row, Relation::Le, 1.0);
            let sol = lp.solve()?;
            Ok((sol.objective, Vector::from_column_slice(&sol.x[..k])))
        }
        _ => Err(Error::NoExactStrategy {
            domain: format!("dual of {}", base.describe()),
            codomain: "R".into(),
            cap: tol::DIMENSION_CAP,
        }),
    }
}

/// `||x||` with dimension checking.
pub fn eval_norm(space: &NormedSpace, x: &Vector) -> Result<f64> {
    space.norm(x)
}

// ---------------------------------------------------------------------------
// linear maps and operator norms

/// A dense operator between subspaces, written in ambient coordinates: the
/// matrix is `(ambient dim of codomain) x (ambient dim of domain)` and only
/// its action on the domain subspace matters.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub domain: Subspace,
    pub codomain: Subspace,
    pub matrix: Matrix,
}

impl LinearMap {
    pub fn new(domain: Subspace, codomain: Subspace, matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != codomain.ambient_dim() || matrix.ncols() != domain.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.ambient_dim() * domain.ambient_dim(),
                got: matrix.nrows() * matrix.ncols(),
            });
        }
        Ok(LinearMap {
            domain,
            codomain,
            matrix,
        })
    }

    /// Map on the whole of `space`.
    pub fn on_space(space: &Arc<NormedSpace>, matrix: Matrix) -> Result<Self> {
        let full = Subspace::full(space.clone());
        Self::new(full.clone(), full, matrix)
    }

    pub fn identity(domain: &Subspace) -> Self {
        let n = domain.ambient_dim();
        LinearMap {
            domain: domain.clone(),
            codomain: domain.clone(),
            matrix: Matrix::identity(n, n),
        }
    }

    /// `self ∘ inner`; requires the inner codomain to sit inside our domain.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        if inner.codomain.ambient_dim() != self.domain.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.ambient_dim(),
                got: inner.codomain.ambient_dim(),
            });
        }
        let r = self.domain.containment_residual(&inner.codomain);
        if r > tol::LINALG {
            return Err(Error::Inclusion(format!(
                "codomain of inner map is not inside the domain (residual {r:e})"
            )));
        }
        Ok(LinearMap {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: &self.matrix * &inner.matrix,
        })
    }

    /// Matrix from domain basis coordinates into codomain ambient coordinates.
    pub fn coordinate_matrix(&self) -> Matrix {
        &self.matrix * self.domain.basis()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormCertificate {
    Exact,
    Bracket { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// max over extreme points of the domain ball
    DomainExtremes,
    /// max over extreme points of the codomain dual ball
    CodomainDualExtremes,
    /// largest singular value in Euclidean coordinates
    Spectral,
    /// sampled lower bound and norm-equivalence upper bound
    Bracket,
    Zero,
}

#[derive(Debug, Clone)]
pub struct OperatorNorm {
    pub value: f64,
    pub certificate: NormCertificate,
    pub strategy: Strategy,
    /// Unit-norm domain vector attaining `value` (domain coordinates).
    pub witness: Vector,
    /// Codomain functional of dual norm at most one with `f.T(witness) = value`.
    pub functional: Vector,
}

impl OperatorNorm {
    pub fn is_exact(&self) -> bool {
        matches!(self.certificate, NormCertificate::Exact)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    pub cap: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            cap: tol::DIMENSION_CAP,
            samples: 10_000,
            seed: 0,
        }
    }
}

/// One candidate of an exact strategy: `value = functional . (T witness)`.
#[derive(Debug, Clone)]
pub struct NormPair {
    pub value: f64,
    pub witness: Vector,
    pub functional: Vector,
}

fn norm_cost(s: &NormedSpace) -> f64 {
    let d = s.dim as f64;
    match &s.kind {
        NormKind::Lp(_) => d,
        NormKind::Facets(f) => f.len() as f64 * d,
        NormKind::Vertices(v) => match &s.facets {
            Some(f) => f.len() as f64 * d,
            None => 200.0 * v.len() as f64 * d,
        },
        NormKind::Induced { base, map } => norm_cost(base) + (map.nrows() * map.ncols()) as f64,
    }
}

fn dual_cost(s: &NormedSpace) -> f64 {
    let d = s.dim as f64;
    match &s.kind {
        NormKind::Lp(_) => d,
        NormKind::Vertices(v) => v.len() as f64 * d,
        NormKind::Facets(f) => match &s.vertices {
            Some(v) => v.len() as f64 * d,
            None => 200.0 * f.len() as f64 * d,
        },
        NormKind::Induced { .. } => {
            if s.euclidean_factor().is_some() {
                d * d * d
            } else {
                2000.0 * d * d
            }
        }
    }
}

fn choose_strategy(m: &Matrix, dom: &NormedSpace, cod: &NormedSpace, cap: usize) -> Strategy {
    let work = (m.nrows() * m.ncols()) as f64;
    let s1 = dom
        .ball_extremes(cap)
        .map(|e| e.half_count() * (norm_cost(cod) + work));
    let s2 = cod
        .dual_extremes(cap)
        .filter(|_| dom.is_polyhedral() || dom.euclidean_factor().is_some() || matches!(dom.kind, NormKind::Lp(_)))
        .map(|e| e.half_count() * (dual_cost(dom) + work));
    match (s1, s2) {
        (Some(a), Some(b)) => {
            if a <= b {
                Strategy::DomainExtremes
            } else {
                Strategy::CodomainDualExtremes
            }
        }
        (Some(_), None) => Strategy::DomainExtremes,
        (None, Some(_)) => Strategy::CodomainDualExtremes,
        (None, None) => {
            if dom.euclidean_factor().is_some() && cod.euclidean_factor().is_some() {
                Strategy::Spectral
            } else {
                Strategy::Bracket
            }
        }
    }
}

/// All candidates of the chosen exact strategy whose value exceeds
/// `threshold`, largest first, at most `limit` of them, together with the
/// overall operator norm.
pub fn norm_pairs(
    m: &Matrix,
    dom: &NormedSpace,
    cod: &NormedSpace,
    opts: &NormOptions,
    threshold: f64,
    limit: usize,
) -> Result<(OperatorNorm, Vec<NormPair>)> {
    if m.nrows() != cod.dim || m.ncols() != dom.dim {
        return Err(Error::DimensionMismatch {
            expected: cod.dim * dom.dim,
            got: m.nrows() * m.ncols(),
        });
    }
    if dom.dim == 0 || cod.dim == 0 || m.amax() == 0.0 {
        let mut w = Vector::zeros(dom.dim);
        if dom.dim > 0 {
            let (_, x) = dom.dual_norm(&Vector::from_element(dom.dim, 1.0))?;
            w = x;
        }
        let on = OperatorNorm {
            value: 0.0,
            certificate: NormCertificate::Exact,
            strategy: Strategy::Zero,
            witness: w,
            functional: Vector::zeros(cod.dim),
        };
        return Ok((on, vec![]));
    }
    let strategy = choose_strategy(m, dom, cod, opts.cap);
    let mut values: Vec<(f64, Vector, Vector)> = Vec::new();
    let mut best: Option<(f64, Vector, Vector)> = None;
    let mut err: Option<Error> = None;
    let mut consider = |val: f64, w: Vector, f: Vector, values: &mut Vec<(f64, Vector, Vector)>| {
        if best.as_ref().map_or(true, |b| val > b.0) {
            best = Some((val, w.clone(), f.clone()));
        }
        if val > threshold && limit > 0 {
            values.push((val, w, f));
        }
    };
    match strategy {
        Strategy::DomainExtremes => {
            let ext = dom.ball_extremes(opts.cap).expect("chosen strategy");
            ext.for_each(|v| {
                if err.is_some() {
                    return;
                }
                match cod.norming_functional(&(m * v)) {
                    Ok((val, f)) => consider(val, v.clone(), f, &mut values),
                    Err(e) => err = Some(e),
                }
            });
        }
        Strategy::CodomainDualExtremes => {
            let ext = cod.dual_extremes(opts.cap).expect("chosen strategy");
            ext.for_each(|g| {
                if err.is_some() {
                    return;
                }
                let mut h = m.tr_mul(g);
                let mut gg = g.clone();
                // the half-enumeration may hand us -g; the dual norm is symmetric
                match dom.dual_norm(&h) {
                    Ok((val, x)) => {
                        if h.dot(&x) < 0.0 {
                            h.neg_mut();
                            gg.neg_mut();
                        }
                        consider(val, x, gg, &mut values)
                    }
                    Err(e) => err = Some(e),
                }
            });
        }
        Strategy::Spectral => {
            let rd = dom.euclidean_factor().expect("euclidean domain");
            let rc = cod.euclidean_factor().expect("euclidean codomain");
            let rd_inv = rd
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidNorm("singular Euclidean factor".into()))?;
            let a = &rc * m * &rd_inv;
            let svd = a.svd(true, true);
            let (i, &s) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, &f64::MIN), |acc, x| if *x.1 > *acc.1 { x } else { acc });
            let v = svd.v_t.expect("v").row(i).transpose();
            let u = svd.u.expect("u").column(i).into_owned();
            let w = &rd_inv * v;
            let f = rc.tr_mul(&u);
            consider(s, w, f, &mut values);
        }
        Strategy::Bracket => {
            let alpha = ball_to_l2(dom).ok_or_else(|| Error::NoExactStrategy {
                domain: dom.describe(),
                codomain: cod.describe(),
                cap: opts.cap,
            })?;
            let beta = l2_to_norm(cod).ok_or_else(|| Error::NoExactStrategy {
                domain: dom.describe(),
                codomain: cod.describe(),
                cap: opts.cap,
            })?;
            let smax = m.clone().singular_values().amax();
            let upper = alpha * smax * beta;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut lo: Option<(f64, Vector, Vector)> = None;
            for _ in 0..opts.samples.max(1) {
                let x = dom.sample_sphere(&mut rng)?;
                let (v, f) = cod.norming_functional(&(m * &x))?;
                if lo.as_ref().map_or(true, |b| v > b.0) {
                    lo = Some((v, x, f));
                }
            }
            let (lower, w, f) = lo.expect("at least one sample");
            let on = OperatorNorm {
                value: lower,
                certificate: NormCertificate::Bracket {
                    lower,
                    upper: upper.max(lower),
                },
                strategy,
                witness: w.clone(),
                functional: f.clone(),
            };
            return Ok((
                on,
                vec![NormPair {
                    value: lower,
                    witness: w,
                    functional: f,
                }],
            ));
        }
        Strategy::Zero => unreachable!(),
    }
    if let Some(e) = err {
        return Err(e);
    }
    let (value, witness, functional) = best.expect("nonempty strategy");
    values.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    values.truncate(limit);
    let pairs = values
        .into_iter()
        .map(|(value, witness, functional)| NormPair {
            value,
            witness,
            functional,
        })
        .collect();
    Ok((
        OperatorNorm {
            value,
            certificate: NormCertificate::Exact,
            strategy,
            witness,
            functional,
        },
        pairs,
    ))
}

/// `max ||x||_2` over the unit ball, when known in closed form.
fn ball_to_l2(s: &NormedSpace) -> Option<f64> {
    let d = s.dim as f64;
    match &s.kind {
        NormKind::Lp(p) => Some(d.powf((0.5 - 1.0 / p).max(0.0))),
        NormKind::Vertices(v) => v.iter().map(|x| x.norm()).reduce(f64::max),
        _ => {
            if let Some(v) = &s.vertices {
                return v.iter().map(|x| x.norm()).reduce(f64::max);
            }
            let r = s.euclidean_factor()?;
            let smin = r.singular_values().min();
            (smin > 0.0).then(|| 1.0 / smin)
        }
    }
}

/// `max ||y||` over the Euclidean unit ball, when known in closed form.
fn l2_to_norm(s: &NormedSpace) -> Option<f64> {
    let d = s.dim as f64;
    match &s.kind {
        NormKind::Lp(p) => Some(d.powf((1.0 / p - 0.5).max(0.0))),
        NormKind::Facets(f) => f.iter().map(|x| x.norm()).reduce(f64::max),
        _ => {
            if let Some(f) = &s.facets {
                return f.iter().map(|x| x.norm()).reduce(f64::max);
            }
            let r = s.euclidean_factor()?;
            Some(r.singular_values().amax())
        }
    }
}

/// Operator norm of a matrix from `dom` coordinates into `cod`.
pub fn operator_norm_matrix(
    m: &Matrix,
    dom: &NormedSpace,
    cod: &NormedSpace,
    opts: &NormOptions,
) -> Result<OperatorNorm> {
    Ok(norm_pairs(m, dom, cod, opts, f64::INFINITY, 0)?.0)
}

/// `||T||` for a map between subspaces, measured with the induced norms.
/// The witness is returned in domain ambient coordinates.
pub fn operator_norm(t: &LinearMap, opts: &NormOptions) -> Result<OperatorNorm> {
    restricted_norm(&t.matrix, &t.domain, t.codomain.ambient(), opts)
}

/// Norm of `matrix` restricted to `domain`, into `codomain`. Full-dimensional
/// domains are measured in ambient coordinates, which keeps the closed-form
/// strategies of `l_p` ambients available.
pub fn restricted_norm(
    matrix: &Matrix,
    domain: &Subspace,
    codomain: &NormedSpace,
    opts: &NormOptions,
) -> Result<OperatorNorm> {
    if domain.is_full() {
        let q = domain.ambient_dim();
        if matrix.ncols() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: matrix.ncols(),
            });
        }
        return operator_norm_matrix(matrix, domain.ambient(), codomain, opts);
    }
    let dom = domain.coordinate_space()?;
    let m = matrix * domain.basis();
    let mut on = operator_norm_matrix(&m, &dom, codomain, opts)?;
    on.witness = domain.basis() * &on.witness;
    Ok(on)
}

// ---------------------------------------------------------------------------
// quotient norms

#[derive(Debug, Clone)]
pub struct QuotientNorm {
    pub value: f64,
    /// Minimizing `y` in ambient coordinates.
    pub minimizer: Vector,
    pub certificate: NormCertificate,
}

/// `inf_{y in Y} ||z - y||_Z`.
pub fn quotient_norm(z_space: &NormedSpace, y: &Subspace, z: &Vector) -> Result<QuotientNorm> {
    z_space.check_len(z)?;
    if y.ambient_dim() != z_space.dim {
        return Err(Error::DimensionMismatch {
            expected: z_space.dim,
            got: y.ambient_dim(),
        });
    }
    let n = z_space.dim;
    let k = y.dim();
    let b = y.basis();
    if k == 0 {
        return Ok(QuotientNorm {
            value: z_space.norm(z)?,
            minimizer: Vector::zeros(n),
            certificate: NormCertificate::Exact,
        });
    }
    let exact = |c: Vec<f64>| -> Result<QuotientNorm> {
        let c = Vector::from_vec(c);
        let ymin = b * c;
        Ok(QuotientNorm {
            value: z_space.norm(&(z - &ymin))?,
            minimizer: ymin,
            certificate: NormCertificate::Exact,
        })
    };
    if let Some(r) = z_space.euclidean_factor() {
        // least squares in the Euclidean frame
        let rb = &r * b;
        let c = linalg::pinv(&rb) * (&r * z);
        return exact(c.iter().cloned().collect());
    }
    // polyhedral: LP over (c, t)
    let facets: Option<Vec<Vector>> = match &z_space.kind {
        NormKind::Lp(p) if p.is_infinite() => {
            let mut fs = Vec::with_capacity(2 * n);
            for i in 0..n {
                let mut e = Vector::zeros(n);
                e[i] = 1.0;
                fs.push(-&e);
                fs.push(e);
            }
            Some(fs)
        }
        _ => z_space.facets.clone(),
    };
    if let Some(fs) = facets {
        let mut bounds = vec![VarBound::Free; k];
        bounds.push(VarBound::Free);
        let mut lp = LinearProgram::new(bounds);
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        lp.minimize(c);
        for f in &fs {
            // f.(z - B c) <= t  <=>  -(B^T f).c - t <= -f.z
            let bf = b.tr_mul(f);
            let mut row: Vec<f64> = bf.iter().map(|v| -v).collect();
            row.push(-1.0);
            lp.add_row(row, Relation::Le, -f.dot(z));
        }
        let sol = lp.solve()?;
        return exact(sol.x[..k].to_vec());
    }
    match &z_space.kind {
        NormKind::Lp(p) if *p == 1.0 => {
            let mut bounds = vec![VarBound::Free; k];
            bounds.extend(vec![VarBound::NonNegative; n]);
            let mut lp = LinearProgram::new(bounds);
            let mut c = vec![0.0; k];
            c.extend(vec![1.0; n]);
            lp.minimize(c);
            for i in 0..n {
                for s in [1.0, -1.0] {
                    // s (z - Bc)_i <= s_i
                    let mut row = vec![0.0; k + n];
                    for j in 0..k {
                        row[j] = -s * b[(i, j)];
                    }
                    row[k + i] = -1.0;
                    lp.add_row(row, Relation::Le, -s * z[i]);
                }
            }
            let sol = lp.solve()?;
            exact(sol.x[..k].to_vec())
        }
        NormKind::Vertices(vs) => {
            // min sum mu  s.t.  sum mu v + B c = z
            let nv = vs.len();
            let mut bounds = vec![VarBound::NonNegative; nv];
            bounds.extend(vec![VarBound::Free; k]);
            let mut lp = LinearProgram::new(bounds);
            let mut c = vec![1.0; nv];
            c.extend(vec![0.0; k]);
            lp.minimize(c);
            for i in 0..n {
                let mut row: Vec<f64> = vs.iter().map(|v| v[i]).collect();
                row.extend((0..k).map(|j| b[(i, j)]));
                lp.add_row(row, Relation::Eq, z[i]);
            }
            let sol = lp.solve()?;
            let c = Vector::from_column_slice(&sol.x[nv..]);
            let ymin = b * &c;
            Ok(QuotientNorm {
                value: sol.objective,
                minimizer: ymin,
                certificate: NormCertificate::Exact,
            })
        }
        _ => quotient_iterative(z_space, y, z),
    }
}

/// Subgradient descent on `c -> ||z - B c||` with a dual lower bound from the
/// annihilator of `Y`.
fn quotient_iterative(z_space: &NormedSpace, y: &Subspace, z: &Vector) -> Result<QuotientNorm> {
    let b = y.basis();
    let k = b.ncols();
    let q = y.orthonormal_basis();
    let mut c = Vector::zeros(k);
    let mut best_c = c.clone();
    let mut upper = z_space.norm(z)?;
    let mut lower = 0.0_f64;
    let step0 = upper.max(1e-12);
    let iters = 20_000;
    for t in 1..=iters {
        let r = z - b * &c;
        let (val, f) = z_space.norming_functional(&r)?;
        if val < upper {
            upper = val;
            best_c = c.clone();
        }
        // f restricted to the annihilator of Y gives a certified lower bound
        let fa = &f - &q * q.tr_mul(&f);
        let (dn, _) = z_space.dual_norm(&fa)?;
        if dn > 1e-14 {
            lower = lower.max(fa.dot(z) / dn);
        }
        if upper - lower <= tol::OPTIMIZATION * upper.max(1.0) || val == 0.0 {
            break;
        }
        let g = -b.tr_mul(&f);
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        c -= g * (step0 / (gn * (t as f64).sqrt()));
    }
    if upper - lower > tol::OPTIMIZATION * upper.max(1.0) {
        return Err(Error::NotConverged { lower, upper });
    }
    Ok(QuotientNorm {
        value: upper,
        minimizer: b * best_c,
        certificate: NormCertificate::Bracket { lower, upper },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn hexagon() -> NormedSpace {
        NormedSpace::from_vertices(vec![
            v(&[1.0, 0.0]),
            v(&[-1.0, 0.0]),
            v(&[0.0, 1.0]),
            v(&[0.0, -1.0]),
            v(&[1.0, 1.0]),
            v(&[-1.0, -1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(NormedSpace::linf(2).norm(&v(&[1.0, -1.0])).unwrap(), 1.0);
        assert_eq!(NormedSpace::l2(2).norm(&v(&[3.0, 4.0])).unwrap(), 5.0);
        assert!((hexagon().norm(&v(&[1.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hexagon_gauge_matches_lp_without_facet_cache() {
        let h = hexagon();
        let NormKind::Vertices(vs) = h.kind() else { panic!() };
        let bare = NormedSpace {
            dim: 2,
            kind: NormKind::Vertices(vs.clone()),
            label: "bare".into(),
            vertices: Some(vs.clone()),
            facets: None,
        };
        for x in [v(&[1.0, 1.0]), v(&[0.3, -0.7]), v(&[2.0, 0.5])] {
            let a = h.norm(&x).unwrap();
            let (b, f) = bare.norming_functional(&x).unwrap();
            assert!((a - b).abs() < 1e-9);
            assert!((f.dot(&x) - b).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(NormedSpace::lp(2, 0.5).is_err());
        assert!(matches!(
            NormedSpace::linf(3).norm(&v(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(NormedSpace::from_vertices(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).is_err());
        assert!(NormedSpace::from_facets(vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])]).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        let s = Arc::new(NormedSpace::linf(3));
        let id = LinearMap::on_space(&s, Matrix::identity(3, 3)).unwrap();
        let on = operator_norm(&id, &NormOptions::default()).unwrap();
        assert_eq!(on.value, 1.0);
        assert!(on.is_exact());

        let s2 = Arc::new(NormedSpace::linf(2));
        let t = LinearMap::on_space(&s2, Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0])).unwrap();
        assert_eq!(operator_norm(&t, &NormOptions::default()).unwrap().value, 2.0);

        let avg = LinearMap::on_space(&s2, Matrix::from_element(2, 2, 0.5)).unwrap();
        assert!((operator_norm(&avg, &NormOptions::default()).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn strategies_agree() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.3, 0.0, 1.0, -1.0, 1.0, 1.0]);
        let linf = NormedSpace::linf(3);
        let l1 = NormedSpace::l1(3);
        let opts = NormOptions::default();
        // linf -> l1: both extremes enumerable
        let a = operator_norm_matrix(&m, &linf, &l1, &opts).unwrap();
        let mut brute = 0.0_f64;
        Extremes::Signs(3).for_each(|s| brute = brute.max((&m * s).lp_norm(1)));
        assert!((a.value - brute).abs() < 1e-12);
        // l2 -> l2 spectral
        let l2 = NormedSpace::l2(3);
        let b = operator_norm_matrix(&m, &l2, &l2, &opts).unwrap();
        assert_eq!(b.strategy, Strategy::Spectral);
        assert!((b.value - m.clone().singular_values().amax()).abs() < 1e-12);
        // l2 -> linf uses dual extremes
        let c = operator_norm_matrix(&m, &l2, &linf, &opts).unwrap();
        let rows = (0..3).map(|i| m.row(i).norm()).fold(0.0, f64::max);
        assert!((c.value - rows).abs() < 1e-12);
    }

    #[test]
    fn witness_attains_value() {
        let h = hexagon();
        let m = Matrix::from_row_slice(2, 2, &[0.3, -1.2, 0.7, 0.4]);
        let on = operator_norm_matrix(&m, &h, &h, &NormOptions::default()).unwrap();
        let ratio = h.norm(&(&m * &on.witness)).unwrap() / h.norm(&on.witness).unwrap();
        assert!((ratio - on.value).abs() < 1e-10);
    }

    #[test]
    fn bracket_for_general_lp() {
        let l3 = NormedSpace::lp(3, 3.0).unwrap();
        let m = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0]);
        let on = operator_norm_matrix(&m, &l3, &l3, &NormOptions::default()).unwrap();
        match on.certificate {
            NormCertificate::Bracket { lower, upper } => assert!(lower <= upper),
            _ => panic!("expected bracket"),
        }
    }

    #[test]
    fn quotient_examples() {
        let l2 = Arc::new(NormedSpace::l2(2));
        let y = Subspace::from_vectors(l2.clone(), &[v(&[1.0, 0.0])]).unwrap();
        let q = quotient_norm(&l2, &y, &v(&[3.0, 4.0])).unwrap();
        assert!((q.value - 4.0).abs() < 1e-12);

        let linf = Arc::new(NormedSpace::linf(2));
        let y = Subspace::from_vectors(linf.clone(), &[v(&[1.0, 1.0])]).unwrap();
        let q = quotient_norm(&linf, &y, &v(&[1.0, -1.0])).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9);
        let q = quotient_norm(&linf, &y, &v(&[2.0, 2.0])).unwrap();
        assert!(q.value.abs() < 1e-9);
    }

    #[test]
    fn quotient_iterative_lp3() {
        let l3 = Arc::new(NormedSpace::lp(3, 3.0).unwrap());
        let y = Subspace::from_vectors(l3.clone(), &[v(&[1.0, 1.0, 0.0])]).unwrap();
        let z = v(&[1.0, -1.0, 0.5]);
        let q = quotient_norm(&l3, &y, &z).unwrap();
        // brute force over the line
        let mut best = f64::MAX;
        for i in -4000..=4000 {
            let t = i as f64 * 1e-3;
            best = best.min(l3.norm(&(&z - v(&[t, t, 0.0]))).unwrap());
        }
        assert!((q.value - best).abs() < 1e-5);
    }

    #[test]
    fn induced_sections() {
        let linf = Arc::new(NormedSpace::linf(3));
        let b = Matrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let s = NormedSpace::induced(&linf, b.clone()).unwrap();
        assert!(matches!(s.kind(), NormKind::Facets(_)));
        let c = v(&[0.4, -0.9]);
        assert!((s.norm(&c).unwrap() - linf.norm(&(&b * &c)).unwrap()).abs() < 1e-14);
        let l2 = Arc::new(NormedSpace::l2(3));
        let e = NormedSpace::induced(&l2, b.clone()).unwrap();
        assert!((e.norm(&c).unwrap() - (&b * &c).norm()).abs() < 1e-12);
        let (dn, x) = e.dual_norm(&c).unwrap();
        assert!((c.dot(&x) - dn).abs() < 1e-12 && (e.norm(&x).unwrap() - 1.0).abs() < 1e-12);
    }
}
