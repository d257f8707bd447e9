//! Sufficient-enlargement bodies: Minkowski sums of scaled balls, their
//! support functions and gauges, the containment test `P(B) ⊆ A`, the
//! direct-sum construction of a projection from two summand projections,
//! and the two experiments on Euclidean spaces inside `l_inf^m`.

use std::collections::HashSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::lp::{LinearProgram, Relation, VarBound};
use crate::minmax::{minimize_max_norm, AffineTerm, MinMaxOptions};
use crate::minproj::{embed_into_linf, lambda_absolute_approx, minimal_projection, EmbedScheme, MinProjOptions};
use crate::projections::{make_projection, Projection};
use crate::spaces::{operator_norm, LinearMap, NormCertificate, NormKind, NormOptions, NormedSpace};
use crate::subspace::Subspace;
use crate::tol;

/// `{G c : ||c||_p <= 1}` or the symmetric hull of a vertex list, written in
/// ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    LpBall { p: f64, basis: Vec<Vec<f64>> },
    Polytope { vertices: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summand {
    pub scale: f64,
    pub body: Body,
}

/// Generator form of a summand: `{G c : ||c||_p <= 1}`; polytopes use
/// `p = 1` over their vertices.
#[derive(Debug, Clone)]
struct Generated {
    p: f64,
    g: Matrix,
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp_norm(c: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        c.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
    } else if p == 1.0 {
        c.iter().map(|x| x.abs()).sum()
    } else {
        c.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Maximizer of `<w, c>` over the unit `l_p` ball.
fn lp_argmax(w: &[f64], p: f64) -> Vec<f64> {
    let q = conjugate(p);
    let n = lp_norm(w, q);
    if n == 0.0 {
        return vec![0.0; w.len()];
    }
    if p.is_infinite() {
        w.iter().map(|x| if *x >= 0.0 { 1.0 } else { -1.0 }).collect()
    } else if p == 1.0 {
        let (i, _) = w
            .iter()
            .enumerate()
            .fold((0, -1.0), |a, (i, x)| if x.abs() > a.1 { (i, x.abs()) } else { a });
        let mut out = vec![0.0; w.len()];
        out[i] = w[i].signum();
        out
    } else {
        w.iter()
            .map(|x| x.signum() * (x.abs() / n).powf(q - 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    /// Gauge of a feasible functional (a lower bound).
    pub lower: f64,
    /// Optimum of the outer approximation of the polar (an upper bound).
    pub upper: f64,
}

impl Gauge {
    pub fn value(&self) -> f64 {
        self.upper
    }
}

/// Decomposition `x = Σ x_i` with `x_i ∈ t · scale_i · body_i`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub t: f64,
    pub lower: f64,
    pub parts: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enlargement {
    pub dim: usize,
    pub summands: Vec<Summand>,
}

impl Enlargement {
    pub fn new(dim: usize, summands: Vec<Summand>) -> Result<Self> {
        Enlargement { dim, summands }.validated()
    }

    /// Checks scales, exponents and dimensions; call after deserializing.
    pub fn validated(self) -> Result<Self> {
        if self.summands.is_empty() {
            return Err(Error::Precondition("enlargement without summands".into()));
        }
        for s in &self.summands {
            if !(s.scale > 0.0) || !s.scale.is_finite() {
                return Err(Error::Precondition(format!("summand scale {} is not positive", s.scale)));
            }
            let gen = self.generator(&s.body)?;
            if gen.g.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidNorm("non-finite body generator".into()));
            }
        }
        Ok(self)
    }

    fn generator(&self, body: &Body) -> Result<Generated> {
        match body {
            Body::LpBall { p, basis } => {
                if !(*p >= 1.0) {
                    return Err(Error::InvalidNorm(format!("p = {p} < 1")));
                }
                Ok(Generated {
                    p: *p,
                    g: self.columns(basis)?,
                })
            }
            Body::Polytope { vertices } => Ok(Generated {
                p: 1.0,
                g: self.columns(vertices)?,
            }),
        }
    }

    fn columns(&self, cols: &[Vec<f64>]) -> Result<Matrix> {
        for c in cols {
            if c.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: c.len(),
                });
            }
        }
        Ok(Matrix::from_fn(self.dim, cols.len(), |i, j| cols[j][i]))
    }

    fn gens(&self) -> impl Iterator<Item = (f64, Generated)> + '_ {
        self.summands
            .iter()
            .map(|s| (s.scale, self.generator(&s.body).expect("validated enlargement")))
    }

    /// `scale · B_X` for the unit ball of `x` in its ambient norm.
    pub fn ball(x: &Subspace, scale: f64) -> Result<Self> {
        let n = x.ambient_dim();
        let cols = |m: &Matrix| -> Vec<Vec<f64>> { m.column_iter().map(|c| c.iter().copied().collect()).collect() };
        let coords = x.coordinate_space()?;
        let body = match coords.kind() {
            NormKind::Lp(p) => Body::LpBall {
                p: *p,
                basis: cols(x.basis()),
            },
            NormKind::Induced { .. } if coords.euclidean_factor().is_some() => {
                let r = coords.euclidean_factor().expect("checked");
                let inv = r
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidNorm("singular Euclidean factor".into()))?;
                Body::LpBall {
                    p: 2.0,
                    basis: cols(&(x.basis() * inv)),
                }
            }
            _ => {
                let vs = coords.ball_vertices().ok_or_else(|| {
                    Error::Precondition(format!("unit ball of {} has no vertex description", x.label()))
                })?;
                let b = x.basis();
                let mut seen: Vec<Vector> = Vec::new();
                for v in vs {
                    let w = b * v;
                    if !seen.iter().any(|u| (u + &w).amax() <= 1e-12 || (u - &w).amax() <= 1e-12) {
                        seen.push(w);
                    }
                }
                Body::Polytope {
                    vertices: seen.iter().map(|v| v.iter().copied().collect()).collect(),
                }
            }
        };
        Enlargement::new(n, vec![Summand { scale, body }])
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let summands = self
            .summands
            .iter()
            .map(|s| Summand {
                scale: s.scale * factor,
                body: s.body.clone(),
            })
            .collect();
        Enlargement::new(self.dim, summands)
    }

    /// Minkowski sum.
    pub fn sum(&self, other: &Enlargement) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        Enlargement::new(self.dim, summands)
    }

    /// Orthonormal basis of the linear span of the body.
    pub fn span(&self) -> Matrix {
        let all: Vec<Matrix> = self.gens().map(|(_, g)| g.g).collect();
        let refs: Vec<&Matrix> = all.iter().collect();
        linalg::orthonormal_basis(&linalg::hstack(&refs), tol::RANK)
    }

    /// `h_A(f) = Σ scale_i h_i(f)` and a point of `A` attaining it.
    pub fn support_point(&self, f: &Vector) -> Result<(f64, Vector)> {
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.len(),
            });
        }
        let mut h = 0.0;
        let mut point = Vector::zeros(self.dim);
        for (s, g) in self.gens() {
            let w = g.g.tr_mul(f);
            h += s * lp_norm(w.as_slice(), conjugate(g.p));
            let c = Vector::from_vec(lp_argmax(w.as_slice(), g.p));
            point += (&g.g * c) * s;
        }
        Ok((h, point))
    }

    pub fn support(&self, f: &Vector) -> Result<f64> {
        self.support_point(f).map(|r| r.0)
    }

    /// Gauge `min{t : x ∈ tA}` through cutting planes on the polar body
    /// `{f : h_A(f) <= 1}`. Infinite when `x` leaves the span of `A`.
    pub fn gauge(&self, x: &Vector) -> Result<Gauge> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let q = self.span();
        let r = q.ncols();
        let xi = q.tr_mul(x);
        let off = (x - &q * &xi).norm();
        if off > tol::LINALG * x.norm().max(1.0) {
            return Ok(Gauge {
                lower: f64::INFINITY,
                upper: f64::INFINITY,
            });
        }
        if xi.amax() == 0.0 || r == 0 {
            return Ok(Gauge { lower: 0.0, upper: 0.0 });
        }
        // polar cuts <Q'a, c> <= 1 from support points a of A
        let mut cuts: Vec<Vector> = Vec::new();
        // generator columns lie in A and already bound the polar
        for (s, g) in self.gens() {
            for j in 0..g.g.ncols() {
                let a = q.tr_mul(&g.g.column(j)) * s;
                cuts.push(-&a);
                cuts.push(a);
            }
        }
        for k in 0..r {
            for s in [1.0, -1.0] {
                let mut c = Vector::zeros(r);
                c[k] = s;
                let (_, a) = self.support_point(&(&q * c))?;
                cuts.push(q.tr_mul(&a));
            }
        }
        let seeded = cuts.len();
        let mut lower = 0.0_f64;
        let mut upper = f64::INFINITY;
        let mut last: Option<Vector> = None;
        let mut pruned = false;
        let mut iter = 0;
        while iter < 500 {
            iter += 1;
            let mut lp = LinearProgram::new(vec![VarBound::Free; r]);
            lp.maximize(xi.iter().copied().collect());
            for a in &cuts {
                lp.add_row(a.iter().copied().collect(), Relation::Le, 1.0);
            }
            let sol = match lp.solve() {
                Ok(sol) => sol,
                // near-parallel cuts around a curved summand: drop the cuts
                // slack at the last master point and try once more
                Err(Error::Certification { .. } | Error::LpFailed(_) | Error::LpUnbounded)
                    if upper.is_finite() =>
                {
                    let Some(p) = last.as_ref().filter(|_| !pruned) else {
                        break;
                    };
                    let newest = cuts.pop().expect("a cut was added");
                    let keep: Vec<Vector> = cuts
                        .drain(seeded..)
                        .filter(|a| a.dot(p) >= 1.0 - 1e-6)
                        .collect();
                    cuts.extend(keep);
                    cuts.push(newest);
                    pruned = true;
                    continue;
                }
                Err(e) => return Err(e),
            };
            pruned = false;
            let c = Vector::from_vec(sol.x.clone());
            upper = upper.min(sol.objective);
            let (h, a) = self.support_point(&(&q * &c))?;
            if h > 0.0 {
                lower = lower.max(xi.dot(&c) / h);
            }
            // a cut violated below the LP tolerance would not move the master
            let stalled = last.as_ref().is_some_and(|p: &Vector| (p - &c).amax() <= 1e-12 * c.amax());
            if upper - lower <= 1e-11 * upper.max(1.0) || h <= 1.0 + 1e-9 || stalled {
                break;
            }
            last = Some(c);
            cuts.push(q.tr_mul(&a));
        }
        Ok(Gauge {
            lower,
            upper: upper.max(lower),
        })
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        Ok(self.gauge(x)?.lower <= 1.0 + 1e-9)
    }

    /// Splits `x` over the summands, minimizing the largest summand gauge.
    /// Independent of [`Enlargement::gauge`]: it works on the primal side.
    pub fn decompose(&self, x: &Vector) -> Result<Decomposition> {
        let gens: Vec<(f64, Generated)> = self.gens().collect();
        let blocks: Vec<Matrix> = gens.iter().map(|(s, g)| &g.g * *s).collect();
        let refs: Vec<&Matrix> = blocks.iter().collect();
        let all = linalg::hstack(&refs);
        let c0 = linalg::pinv(&all) * x;
        let res = (&all * &c0 - x).norm();
        if res > tol::LINALG * x.norm().max(1.0) {
            return Err(Error::Inclusion(format!("point leaves the span of the body (residual {res:e})")));
        }
        let null = linalg::null_space(&all, tol::RANK);
        let q = null.ncols();
        let one = Arc::new(NormedSpace::linf(1));
        let mut terms = Vec::with_capacity(gens.len());
        let mut off = 0;
        for (_, g) in &gens {
            let r = g.g.ncols();
            let cod = Arc::new(NormedSpace::lp(r, g.p)?);
            terms.push(AffineTerm::new(
                Matrix::from_column_slice(r, 1, &c0.as_slice()[off..off + r]),
                null.rows(off, r).into_owned(),
                Matrix::identity(1, 1),
                one.clone(),
                cod,
            )?);
            off += r;
        }
        let (t, lower, c) = if q == 0 {
            let t = terms
                .iter()
                .map(|t| t.eval(&Matrix::zeros(0, 1)))
                .zip(&gens)
                .map(|(m, (_, g))| lp_norm(m.as_slice(), g.p))
                .fold(0.0, f64::max);
            (t, t, c0.clone())
        } else {
            let opts = MinMaxOptions {
                gap: 1e-10,
                ..Default::default()
            };
            let r = minimize_max_norm(&terms, &Matrix::zeros(q, 1), &opts)?;
            (r.value, r.lower, &c0 + &null * r.g.column(0))
        };
        let mut parts = Vec::with_capacity(gens.len());
        let mut off = 0;
        for b in &blocks {
            let r = b.ncols();
            parts.push(b * c.rows(off, r));
            off += r;
        }
        Ok(Decomposition { t, lower, parts })
    }
}

// ---------------------------------------------------------------------------
// containment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub holds: bool,
    /// `1 - max gauge_A(P v)` over the domain ball.
    pub margin: f64,
    /// A domain extreme point whose image leaves `A`.
    pub witness: Option<Vec<f64>>,
    pub exact: bool,
}

/// Sign convention for witnesses: first nonzero entry positive.
fn canonical_sign(v: &Vector) -> Vector {
    match v.iter().find(|x| x.abs() > 1e-12) {
        Some(x) if *x < 0.0 => -v,
        _ => v.clone(),
    }
}

/// Decides `P(B_Z) ⊆ A`. When the summand spans are independent the gauge
/// of `A` splits as a max over summands and the test reduces to exact
/// operator norms; otherwise the extreme points of `B_Z` are enumerated.
pub fn contains_image(p: &Projection, a: &Enlargement, opts: &NormOptions) -> Result<Containment> {
    let domain = p.domain();
    if domain.ambient_dim() != a.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: domain.ambient_dim(),
        });
    }
    let (frame, coords) = domain.frame()?;
    if !coords.is_polyhedral() {
        return Err(Error::Precondition(format!(
            "containment needs a polyhedral domain, got {}",
            coords.describe()
        )));
    }
    let span = a.span();
    let img_res = linalg::span_residual(&span, &(p.matrix() * &frame));
    if img_res > tol::LINALG {
        let w = p.matrix() * &frame;
        // an image direction outside the span of A
        let j = (0..w.ncols())
            .max_by(|&i, &j| {
                let ri = (w.column(i) - &span * span.tr_mul(&w.column(i))).norm();
                let rj = (w.column(j) - &span * span.tr_mul(&w.column(j))).norm();
                ri.total_cmp(&rj)
            })
            .unwrap_or(0);
        return Ok(Containment {
            holds: false,
            margin: f64::NEG_INFINITY,
            witness: Some(frame.column(j).iter().copied().collect()),
            exact: true,
        });
    }
    let gens: Vec<(f64, Generated)> = a.gens().collect();
    let bases: Vec<Matrix> = gens
        .iter()
        .map(|(_, g)| linalg::orthonormal_basis(&g.g, tol::RANK))
        .collect();
    let total: usize = bases.iter().map(|b| b.ncols()).sum();
    if total == span.ncols() && gens.len() > 0 {
        return split_containment(p, &gens, &bases, opts);
    }
    enumerate_containment(p, a, &frame, &coords, opts)
}

fn split_containment(
    p: &Projection,
    gens: &[(f64, Generated)],
    bases: &[Matrix],
    opts: &NormOptions,
) -> Result<Containment> {
    let refs: Vec<&Matrix> = bases.iter().collect();
    let joint = linalg::hstack(&refs);
    let coords_of = linalg::pinv(&joint);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut exact = true;
    let mut off = 0;
    for ((s, g), b) in gens.iter().zip(bases) {
        let r = b.ncols();
        // coordinates in the summand basis, then the body's own gauge there
        let to_coords = coords_of.rows(off, r).into_owned();
        off += r;
        let gb = b.tr_mul(&g.g);
        let space = if g.g.ncols() == r {
            let inv = gb
                .try_inverse()
                .ok_or_else(|| Error::InvalidNorm("singular body generator".into()))?;
            NormedSpace::induced(&Arc::new(NormedSpace::lp(r, g.p)?), inv)?
        } else if g.p == 1.0 {
            let mut vs = Vec::with_capacity(2 * gb.ncols());
            for c in gb.column_iter() {
                vs.push(c.into_owned());
                vs.push(-c.into_owned());
            }
            NormedSpace::from_vertices(vs)?
        } else {
            return Err(Error::Precondition("redundant generators for a non-polytope body".into()));
        };
        let cod = Subspace::full(Arc::new(space));
        let map = LinearMap::new(p.domain().clone(), cod, &to_coords * p.matrix())?;
        let on = operator_norm(&map, opts)?;
        exact &= matches!(on.certificate, NormCertificate::Exact);
        let ratio = on.value / s;
        if ratio > worst {
            worst = ratio;
            witness = Some(canonical_sign(&on.witness));
        }
    }
    let margin = 1.0 - worst;
    let holds = margin >= -tol::LINALG;
    Ok(Containment {
        holds,
        margin,
        witness: if holds { None } else { witness.map(|w| w.iter().copied().collect()) },
        exact,
    })
}

fn enumerate_containment(
    p: &Projection,
    a: &Enlargement,
    frame: &Matrix,
    coords: &NormedSpace,
    opts: &NormOptions,
) -> Result<Containment> {
    let ext = coords.ball_extremes(opts.cap).ok_or_else(|| {
        Error::EnumerationTooLarge(format!("extreme points of {} beyond cap {}", coords.describe(), opts.cap))
    })?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut err = None;
    ext.for_each(|v| {
        if err.is_some() {
            return;
        }
        let z = frame * v;
        match a.gauge(&(p.matrix() * &z)) {
            Ok(g) => {
                if g.upper > worst {
                    worst = g.upper;
                    witness = Some(canonical_sign(&z));
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let margin = 1.0 - worst;
    let holds = margin >= -tol::LINALG;
    Ok(Containment {
        holds,
        margin,
        witness: if holds { None } else { witness.map(|w| w.iter().copied().collect()) },
        exact: true,
    })
}

// ---------------------------------------------------------------------------
// direct sums

/// Produces a projection of `domain` onto `target` vanishing on `kill`
/// whose ball image should lie in `body`. Projections that kill a subspace
/// are exactly the projections of the quotient by it, so the quotient is
/// represented by the forced kernel.
pub trait Realizer {
    fn realize(&self, domain: &Subspace, target: &Subspace, kill: &Subspace, body: &Enlargement) -> Result<Projection>;
}

impl<F> Realizer for F
where
    F: Fn(&Subspace, &Subspace, &Subspace, &Enlargement) -> Result<Projection>,
{
    fn realize(&self, domain: &Subspace, target: &Subspace, kill: &Subspace, body: &Enlargement) -> Result<Projection> {
        self(domain, target, kill, body)
    }
}

/// Minimal projection with the forced kernel.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinimalRealizer(pub MinProjOptions);

impl Realizer for MinimalRealizer {
    fn realize(&self, domain: &Subspace, target: &Subspace, kill: &Subspace, _body: &Enlargement) -> Result<Projection> {
        let k = if kill.dim() == 0 { None } else { Some(kill) };
        Ok(minimal_projection(domain, target, k, &self.0)?.projection)
    }
}

/// Outcome of checking `||x|| <= ||(x, y)||` on `X ⊕ Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumConditions {
    /// Largest `||(f, 0)||_*` over extreme functionals `f` of `B_X*`, and the
    /// same for `Y`; both at most one when the conditions hold.
    pub x_excess: f64,
    pub y_excess: f64,
    /// Checked on a sample rather than exactly.
    pub sampled: bool,
}

#[derive(Debug, Clone)]
pub struct DirectSumProjection {
    pub projection: Projection,
    pub px: Projection,
    pub py: Projection,
    pub conditions: SumConditions,
    /// `max(||P_X y||, ||P_Y x||)` over the bases of `Y` and `X`.
    pub cross_residual: f64,
    pub identity_residual: f64,
}

/// Largest dual norm of `(f, 0)` in `X ⊕ Y` over extreme functionals `f` of
/// `B_X*`; sampled when the ball of `X` is not polyhedral.
fn condition_excess(x: &Subspace, y: &Subspace, sum: &Subspace, which: &'static str, number: u8) -> Result<(f64, bool)> {
    if x.dim() == 0 {
        return Ok((0.0, false));
    }
    let xs = x.coordinate_space()?;
    let ss = sum.coordinate_space()?;
    // coordinates of x-basis and y-basis inside the sum basis
    let to_sum = linalg::pinv(sum.basis());
    let bx = &to_sum * x.basis();
    let by = &to_sum * y.basis();
    // a functional f on X extended by zero on Y, in sum coordinates
    let joint = linalg::hstack(&[&bx, &by]);
    let joint_inv = joint
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotDirectSum("X + Y does not fill its span".into()))?;
    let extend = |f: &Vector| -> Vector {
        let mut full = Vector::zeros(joint.ncols());
        full.rows_mut(0, f.len()).copy_from(f);
        joint_inv.tr_mul(&full)
    };
    if let Some(fs) = xs.ball_facets() {
        let mut worst = 0.0_f64;
        for f in fs {
            let g = extend(f);
            let (dn, z) = ss.dual_norm(&g)?;
            if dn > 1.0 + tol::LINALG {
                // z is a unit vector of X ⊕ Y with f(x-part) = dn
                let parts = &joint_inv * &z;
                let xpart = parts.rows(0, x.dim()).into_owned();
                return Err(Error::SumCondition {
                    condition: number,
                    which,
                    lhs: xs.norm(&xpart)?,
                    rhs: ss.norm(&z)?,
                });
            }
            worst = worst.max(dn);
        }
        return Ok((worst, false));
    }
    // smooth case: ||x|| against the quotient norm modulo Y on a sample
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = 0.0_f64;
    let amb = sum.ambient();
    for _ in 0..10_000 {
        let c = xs.sample_sphere(&mut rng)?;
        let v = x.basis() * &c;
        let q = crate::spaces::quotient_norm(amb, y, &v)?;
        let excess = 1.0 / q.value.max(1e-300);
        if excess > 1.0 + 1e-6 {
            return Err(Error::SumCondition {
                condition: number,
                which,
                lhs: 1.0,
                rhs: q.value,
            });
        }
        worst = worst.max(excess);
    }
    Ok((worst, true))
}

/// `Pz = P_X z + P_Y z` with `P_X` onto `X` killing `Y` and `P_Y` onto `Y`
/// killing `X`, both supplied by `realizer`.
pub fn l1_sum_construction(
    x: &Subspace,
    y: &Subspace,
    z: &Subspace,
    a_x: &Enlargement,
    a_y: &Enlargement,
    realizer: &dyn Realizer,
) -> Result<DirectSumProjection> {
    if !z.contains(x) || !z.contains(y) {
        return Err(Error::Inclusion("X and Y must lie in Z".into()));
    }
    let sum = if y.dim() == 0 {
        x.clone()
    } else if x.dim() == 0 {
        y.clone()
    } else {
        x.direct_sum(y)?
    };
    let (xe, xs) = condition_excess(x, y, &sum, "x", 1)?;
    let (ye, ys) = condition_excess(y, x, &sum, "y", 2)?;
    let conditions = SumConditions {
        x_excess: xe,
        y_excess: ye,
        sampled: xs || ys,
    };
    let px = if x.dim() == 0 {
        zero_projection(z, x)?
    } else {
        realizer.realize(z, x, y, a_x)?
    };
    let py = if y.dim() == 0 {
        zero_projection(z, y)?
    } else {
        realizer.realize(z, y, x, a_y)?
    };
    let cross = |p: &Projection, s: &Subspace| -> f64 {
        let m = p.matrix() * s.orthonormal_basis();
        if m.ncols() == 0 {
            0.0
        } else {
            m.amax()
        }
    };
    let cross_residual = cross(&px, y).max(cross(&py, x));
    let matrix = px.matrix() + py.matrix();
    let projection = Projection::new(z.clone(), sum.clone(), matrix)?;
    let q = sum.orthonormal_basis();
    let identity_residual = (projection.matrix() * &q - &q).amax();
    Ok(DirectSumProjection {
        projection,
        px,
        py,
        conditions,
        cross_residual,
        identity_residual,
    })
}

fn zero_projection(z: &Subspace, zero: &Subspace) -> Result<Projection> {
    let n = z.ambient_dim();
    Projection::new(z.clone(), zero.clone(), Matrix::zeros(n, n))
}

// ---------------------------------------------------------------------------
// experiments

/// Drops repeated functionals (up to sign).
fn distinct_up_to_sign(fs: &[Vector]) -> Vec<(Vector, Vec<(usize, f64)>)> {
    let mut out: Vec<(Vector, Vec<(usize, f64)>)> = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        match out.iter_mut().find(|(g, _)| (g - f).amax() <= 1e-12 || (g + f).amax() <= 1e-12) {
            Some((g, idx)) => {
                let s = if (&*g - f).amax() <= 1e-12 { 1.0 } else { -1.0 };
                idx.push((i, s));
            }
            None => out.push((f.clone(), vec![(i, 1.0)])),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub lambda_k: f64,
    pub lambda_n: f64,
    pub eta: f64,
    pub p2_norm: f64,
    pub composite_norm: f64,
    /// `||P1 P2|| / λ̂_k`.
    pub gap_ratio: f64,
    /// `(1 - η) λ̂_n - τ-slack`.
    pub floor: f64,
    pub holds: bool,
}

/// `l2^k ⊂ l2^n ⊂ l_inf^m`: a minimal `P2` onto the copy of `l2^n`, composed
/// with the orthogonal `P1` onto the first `k` coordinates.
pub fn example_experiment(k: usize, n: usize, m: usize, opts: &MinProjOptions) -> Result<ExampleReport> {
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let e = embed_into_linf(&NormedSpace::l2(n), m, EmbedScheme::Grid)?;
    let full = Subspace::full(e.ambient.clone());
    let p2r = minimal_projection(&full, &e.copy, None, opts)?;
    let lambda_n = p2r.lambda;
    let lambda_k = if k == n {
        lambda_n
    } else {
        lambda_absolute_approx(&NormedSpace::l2(k), &[m], EmbedScheme::Grid, opts)?[0].result.lambda
    };
    let j = e.copy.basis().clone();
    let xk = Subspace::new(e.ambient.clone(), j.columns(0, k).into_owned(), "X1")?;
    let rest = Subspace::new(e.ambient.clone(), j.columns(k, n - k).into_owned(), "")?;
    let p1 = if k == n {
        Projection::identity(&e.copy)
    } else {
        make_projection(&e.copy, &xk, &rest)?
    };
    let comp = p1.compose(&p2r.projection)?;
    let nopts = opts.minmax.norm;
    let composite_norm = comp.norm(&nopts)?.value;
    let p2_norm = p2r.projection.norm(&nopts)?.value;
    let floor = (1.0 - e.eta) * lambda_n - p2r.tau * lambda_n;
    Ok(ExampleReport {
        k,
        n,
        m,
        lambda_k,
        lambda_n,
        eta: e.eta,
        p2_norm,
        composite_norm,
        gap_ratio: composite_norm / lambda_k,
        floor,
        holds: composite_norm >= floor - tol::OPTIMIZATION,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sqrt2Report {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub lambda_k: f64,
    pub lambda_n_minus_k: f64,
    pub lambda_n: f64,
    /// `sqrt(λ̂_k² + λ̂_{n-k}²)`.
    pub lhs: f64,
    /// `sqrt(2) λ̂_n`.
    pub rhs: f64,
    pub slack: f64,
    pub inequality_holds: bool,
    /// Dimension of the ambient `l_inf` hosting `X ⊕ Y`.
    pub ambient_dim: usize,
    pub p2_norm: f64,
    pub p2_bound_holds: bool,
    /// Containment margin of `P2(B)` in `λ̂_k B_X + λ̂_{n-k} B_Y`.
    pub margin: f64,
}

/// Builds `X ⊕ Y ≅ l2^k ⊕ l2^(n-k)` inside `l_inf` from the resolution-`m`
/// functional sets `U_k`, `U_(n-k)`: coordinates `(a, 0)`, `(0, b)` and the
/// mixed `(a cos φ, b sin φ)`, so both summand norms are attained by
/// functionals that vanish on the other summand.
fn split_ambient(uk: &[Vector], ur: &[Vector], k: usize, r: usize) -> Vec<Vector> {
    let n = k + r;
    let mut fs = Vec::new();
    for a in uk {
        let mut v = Vector::zeros(n);
        v.rows_mut(0, k).copy_from(a);
        fs.push(v);
    }
    for b in ur {
        let mut v = Vector::zeros(n);
        v.rows_mut(k, r).copy_from(b);
        fs.push(v);
    }
    let pick = |u: &[Vector], at_most: usize| -> Vec<Vector> {
        let step = u.len().div_ceil(at_most).max(1);
        u.iter().step_by(step).cloned().collect()
    };
    let a_sub = pick(uk, 8);
    let b_sub = pick(ur, 8);
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    for phi in [std::f64::consts::FRAC_PI_8, std::f64::consts::FRAC_PI_4, 3.0 * std::f64::consts::FRAC_PI_8] {
        for a in &a_sub {
            for b in &b_sub {
                for s in [1.0, -1.0] {
                    let mut v = Vector::zeros(n);
                    v.rows_mut(0, k).copy_from(&(a * phi.cos()));
                    v.rows_mut(k, r).copy_from(&(b * (s * phi.sin())));
                    let key: Vec<i64> = canonical_sign(&v).iter().map(|x| (x * 1e9).round() as i64).collect();
                    if seen.insert(key) {
                        fs.push(v);
                    }
                }
            }
        }
    }
    fs
}

/// Compares `sqrt(λ̂_k² + λ̂_(n-k)²)` with `sqrt(2) λ̂_n` and builds the
/// projection onto `l2^k ⊕ l2^(n-k)` whose ball image lies in
/// `λ̂_k B_X + λ̂_(n-k) B_Y`.
pub fn sqrt2_bound_check(k: usize, n: usize, m: usize, tolerance: f64, opts: &MinProjOptions) -> Result<Sqrt2Report> {
    if n < 2 || k == 0 || k >= n {
        return Err(Error::Precondition(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let r = n - k;
    let est = |d: usize| -> Result<(f64, Projection, Vec<Vector>)> {
        let e = embed_into_linf(&NormedSpace::l2(d), m, EmbedScheme::Grid)?;
        let full = Subspace::full(e.ambient.clone());
        let res = minimal_projection(&full, &e.copy, None, opts)?;
        Ok((res.lambda, res.projection, e.functionals))
    };
    let (lk, qk, fk) = est(k)?;
    let (lr, qr, fr) = if r == k { (lk, qk.clone(), fk.clone()) } else { est(r)? };
    let ln = lambda_absolute_approx(&NormedSpace::l2(n), &[m], EmbedScheme::Grid, opts)?[0].result.lambda;

    let dk = distinct_up_to_sign(&fk);
    let dr = distinct_up_to_sign(&fr);
    let uk: Vec<Vector> = dk.iter().map(|d| d.0.clone()).collect();
    let ur: Vec<Vector> = dr.iter().map(|d| d.0.clone()).collect();
    let fs = split_ambient(&uk, &ur, k, r);
    let big = fs.len();
    let amb = Arc::new(NormedSpace::linf(big));
    let j = Matrix::from_fn(big, n, |i, c| fs[i][c]);
    let z = Subspace::full(amb.clone());
    let x = Subspace::new(amb.clone(), j.columns(0, k).into_owned(), "X")?;
    let y = Subspace::new(amb.clone(), j.columns(k, r).into_owned(), "Y")?;

    // Pull back the resolution-m projection through the coordinates holding U_k
    // (resp. U_(n-k)); those coordinates vanish on the other summand.
    let pull = |q: &Projection, d: &[(Vector, Vec<(usize, f64)>)], offset: usize, target: &Subspace, f: &[Vector]| -> Result<Projection> {
        let mm = f.len();
        // R: Z -> l_inf^m, coordinate i of the padded list read from Z
        let mut rmat = Matrix::zeros(mm, big);
        for (slot, (_, idx)) in d.iter().enumerate() {
            for &(i, s) in idx {
                rmat[(i, offset + slot)] = s;
            }
        }
        let fmat = Matrix::from_fn(mm, f[0].len(), |i, c| f[i][c]);
        let coords = linalg::pinv(&fmat) * q.matrix() * rmat;
        Projection::new(z.clone(), target.clone(), target.basis() * coords)
    };
    let px = pull(&qk, &dk, 0, &x, &fk)?;
    let py = pull(&qr, &dr, uk.len(), &y, &fr)?;
    let realizer = |_: &Subspace, t: &Subspace, _: &Subspace, _: &Enlargement| -> Result<Projection> {
        if t.same_as(&x) {
            Ok(px.clone())
        } else {
            Ok(py.clone())
        }
    };
    let a_x = Enlargement::ball(&x, lk)?;
    let a_y = Enlargement::ball(&y, lr)?;
    let sum = l1_sum_construction(&x, &y, &z, &a_x, &a_y, &realizer)?;
    let nopts = opts.minmax.norm;
    let p2_norm = sum.projection.norm(&nopts)?.value;
    let containment = contains_image(&sum.projection, &a_x.sum(&a_y)?, &nopts)?;
    let lhs = (lk * lk + lr * lr).sqrt();
    let rhs = std::f64::consts::SQRT_2 * ln;
    Ok(Sqrt2Report {
        k,
        n,
        m,
        lambda_k: lk,
        lambda_n_minus_k: lr,
        lambda_n: ln,
        lhs,
        rhs,
        slack: rhs - lhs,
        inequality_holds: lhs < rhs,
        ambient_dim: big,
        p2_norm,
        p2_bound_holds: p2_norm <= lhs + tolerance,
        margin: containment.margin,
    })
}

impl Sqrt2Report {
    pub const CSV_HEADER: &'static str = "k,n,m,lambda_k,lambda_n,lhs,rhs,margin";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k, self.n, self.m, self.lambda_k, self.lambda_n, self.lhs, self.rhs, self.slack
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn averaging_projection_on_the_diagonal() {
        let s = Arc::new(NormedSpace::linf(2));
        let z = Subspace::full(s.clone());
        let d = Subspace::from_vectors(s, &[v(&[1.0, 1.0])]).unwrap();
        let p = Projection::new(z, d.clone(), Matrix::from_element(2, 2, 0.5)).unwrap();
        let a = Enlargement::ball(&d, 1.0).unwrap();
        let c = contains_image(&p, &a, &NormOptions::default()).unwrap();
        assert!(c.holds && c.margin.abs() < 1e-12);
        let c = contains_image(&p, &a.scaled(0.9).unwrap(), &NormOptions::default()).unwrap();
        assert!(!c.holds);
        assert_eq!(c.witness.unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn gauge_of_a_sum_of_segments() {
        // [-e1, e1] + [-e2, e2] is the unit square
        let a = Enlargement::new(
            2,
            vec![
                Summand {
                    scale: 1.0,
                    body: Body::Polytope { vertices: vec![vec![1.0, 0.0]] },
                },
                Summand {
                    scale: 1.0,
                    body: Body::Polytope { vertices: vec![vec![0.0, 1.0]] },
                },
            ],
        )
        .unwrap();
        let g = a.gauge(&v(&[0.5, -2.0])).unwrap();
        assert!((g.upper - 2.0).abs() < 1e-9 && (g.lower - 2.0).abs() < 1e-9);
        let d = a.decompose(&v(&[0.5, -2.0])).unwrap();
        assert!((d.t - 2.0).abs() < 1e-9);
        assert!((a.support(&v(&[1.0, 1.0])).unwrap() - 2.0).abs() < 1e-12);
        assert!(a.gauge(&v(&[0.0, 0.0])).unwrap().upper == 0.0);
    }

    #[test]
    fn euclidean_disc_plus_segment() {
        let a = Enlargement::new(
            2,
            vec![
                Summand {
                    scale: 1.0,
                    body: Body::LpBall {
                        p: 2.0,
                        basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    },
                },
                Summand {
                    scale: 1.0,
                    body: Body::Polytope { vertices: vec![vec![1.0, 0.0]] },
                },
            ],
        )
        .unwrap();
        // (2, 0) is on the boundary, (1, 1) too
        for x in [v(&[2.0, 0.0]), v(&[1.0, 1.0])] {
            let g = a.gauge(&x).unwrap();
            assert!((g.upper - 1.0).abs() < 1e-6, "{g:?}");
            let d = a.decompose(&x).unwrap();
            assert!((d.t - 1.0).abs() < 1e-6, "{}", d.t);
        }
    }

    #[test]
    fn coordinate_blocks_give_the_coordinate_projection() {
        let s = Arc::new(NormedSpace::linf(4));
        let z = Subspace::full(s.clone());
        let e = |i: usize| {
            let mut x = Vector::zeros(4);
            x[i] = 1.0;
            x
        };
        let x = Subspace::from_vectors(s.clone(), &[e(0)]).unwrap();
        let y = Subspace::from_vectors(s.clone(), &[e(1), e(2)]).unwrap();
        let ax = Enlargement::ball(&x, 1.0).unwrap();
        let ay = Enlargement::ball(&y, 1.0).unwrap();
        let r = l1_sum_construction(&x, &y, &z, &ax, &ay, &MinimalRealizer::default()).unwrap();
        assert!(r.cross_residual < 1e-9 && r.identity_residual < 1e-9);
        let c = contains_image(&r.projection, &ax.sum(&ay).unwrap(), &NormOptions::default()).unwrap();
        assert!(c.holds, "{c:?}");
        assert!(c.margin > -1e-8);
    }

    #[test]
    fn condition_failure_is_reported() {
        let s = Arc::new(NormedSpace::l1(2));
        let z = Subspace::full(s.clone());
        let x = Subspace::from_vectors(s.clone(), &[v(&[1.0, 1.0])]).unwrap();
        let y = Subspace::from_vectors(s.clone(), &[v(&[1.0, -1.0])]).unwrap();
        let ax = Enlargement::ball(&x, 1.0).unwrap();
        let ay = Enlargement::ball(&y, 1.0).unwrap();
        // ||(1,1) + t(1,-1)||_1 >= 2 for every t
        assert!(l1_sum_construction(&x, &y, &z, &ax, &ay, &MinimalRealizer::default()).is_ok());
        let y2 = Subspace::from_vectors(s, &[v(&[1.0, 0.0])]).unwrap();
        let ay2 = Enlargement::ball(&y2, 1.0).unwrap();
        // (1,1) - (1,0) = (0,1) has norm 1 < 2
        let err = l1_sum_construction(&x, &y2, &z, &ax, &ay2, &MinimalRealizer::default()).unwrap_err();
        assert!(matches!(err, Error::SumCondition { condition: 1, .. }), "{err:?}");
    }
}
