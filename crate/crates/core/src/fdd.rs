//! Finite-dimensional decompositions at desk scale: decomposition
//! constants, perturbations of the blocks, the blocking step, interlaced
//! systems, the commuting-projection construction and stabilized products
//! of chain steps.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::minproj::{minimal_projection, MinProjOptions};
use crate::projections::{composition_table, orthogonal_projection, Chain, Projection};
use crate::spaces::{gaussian, restricted_norm, NormCertificate, NormOptions, NormedSpace};
use crate::subspace::Subspace;
use crate::tol;

/// `||M||` on `domain` measured in the ambient norm; Euclidean fallback when
/// no strategy applies (only used for residuals).
fn map_norm(m: &Matrix, domain: &Subspace, opts: &NormOptions) -> Result<(f64, NormCertificate)> {
    if domain.dim() == 0 || (m * domain.basis()).amax() == 0.0 {
        return Ok((0.0, NormCertificate::Exact));
    }
    let on = restricted_norm(m, domain, domain.ambient(), opts)?;
    Ok((on.value, on.certificate))
}

/// Blocks `W_1 ⊕ ... ⊕ W_L` of the whole ambient with their canonical
/// partial-sum projections `S_n`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    ambient: Arc<NormedSpace>,
    blocks: Vec<Subspace>,
    canonical: Vec<Projection>,
    constant: f64,
    certificate: NormCertificate,
}

impl Decomposition {
    pub fn new(ambient: Arc<NormedSpace>, blocks: Vec<Subspace>, opts: &NormOptions) -> Result<Self> {
        let n = ambient.dim();
        let blocks: Vec<Subspace> = blocks.into_iter().filter(|b| b.dim() > 0).collect();
        if blocks.is_empty() {
            return Err(Error::Precondition("decomposition without blocks".into()));
        }
        for b in &blocks {
            if b.ambient_dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: b.ambient_dim(),
                });
            }
        }
        let refs: Vec<&Matrix> = blocks.iter().map(|b| b.basis()).collect();
        let all = linalg::hstack(&refs);
        if all.ncols() != n {
            return Err(Error::NotDirectSum(format!("blocks have total dimension {}, ambient {n}", all.ncols())));
        }
        let r = linalg::rank(&all, tol::RANK);
        if r < n {
            return Err(Error::RankCollapse { rank: r, expected: n });
        }
        let inv = all
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotDirectSum("stacked block bases are singular".into()))?;
        let full = Subspace::full(ambient.clone());
        let mut canonical = Vec::with_capacity(blocks.len());
        let mut constant = 1.0_f64;
        let mut certificate = NormCertificate::Exact;
        let mut width = 0;
        for (i, b) in blocks.iter().enumerate() {
            width += b.dim();
            let m = all.columns(0, width) * inv.rows(0, width);
            let image = Subspace::new(ambient.clone(), all.columns(0, width).into_owned(), format!("Z{}", i + 1))?;
            let p = Projection::new(full.clone(), image, m)?;
            let (v, c) = map_norm(p.matrix(), &full, opts)?;
            if v > constant {
                constant = v;
            }
            if let NormCertificate::Bracket { .. } = c {
                certificate = c;
            }
            canonical.push(p);
        }
        Ok(Decomposition {
            ambient,
            blocks,
            canonical,
            constant,
            certificate,
        })
    }

    /// Coordinate blocks of the given sizes.
    pub fn coordinate(ambient: Arc<NormedSpace>, sizes: &[usize], opts: &NormOptions) -> Result<Self> {
        let n = ambient.dim();
        if sizes.iter().sum::<usize>() != n {
            return Err(Error::Precondition(format!("block sizes {sizes:?} do not add up to {n}")));
        }
        let mut at = 0;
        let mut blocks = Vec::with_capacity(sizes.len());
        for (i, &s) in sizes.iter().enumerate() {
            let b = Matrix::from_fn(n, s, |r, c| if r == at + c { 1.0 } else { 0.0 });
            blocks.push(Subspace::new(ambient.clone(), b, format!("W{}", i + 1))?);
            at += s;
        }
        Decomposition::new(ambient, blocks, opts)
    }

    pub fn ambient(&self) -> &Arc<NormedSpace> {
        &self.ambient
    }

    pub fn blocks(&self) -> &[Subspace] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `S_n` for `n = 1..=L` (1-based); the identity for `n > L`.
    pub fn canonical(&self, n: usize) -> Matrix {
        let d = self.ambient.dim();
        if n == 0 {
            Matrix::zeros(d, d)
        } else if n > self.blocks.len() {
            Matrix::identity(d, d)
        } else {
            self.canonical[n - 1].matrix().clone()
        }
    }

    pub fn canonical_projections(&self) -> &[Projection] {
        &self.canonical
    }

    /// `W_1 ⊕ ... ⊕ W_n` (the whole ambient for `n >= L`).
    pub fn partial_sum(&self, n: usize) -> Subspace {
        if n == 0 {
            return Subspace::zero(self.ambient.clone());
        }
        if n >= self.blocks.len() {
            return Subspace::full(self.ambient.clone());
        }
        self.canonical[n - 1].image().clone()
    }

    /// `K = max_n ||S_n||`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn certificate(&self) -> NormCertificate {
        self.certificate
    }

    /// `max_{n,m} |S_n S_m - S_min(n,m)|` entrywise.
    pub fn law_residual(&self) -> f64 {
        let l = self.blocks.len();
        let mut worst = 0.0_f64;
        for a in 1..=l {
            for b in 1..=l {
                let d = self.canonical(a) * self.canonical(b) - self.canonical(a.min(b));
                worst = worst.max(d.amax());
            }
        }
        worst
    }
}

pub fn decomposition_constant(d: &Decomposition) -> (f64, NormCertificate) {
    (d.constant(), d.certificate())
}

// ---------------------------------------------------------------------------
// perturbation

#[derive(Debug, Clone)]
pub struct Perturbed {
    pub decomposition: Decomposition,
    /// `||(E_i - I)|W_i||`.
    pub measured: Vec<f64>,
    /// The bounds used in the hypothesis (claimed, or measured if none given).
    pub eps: Vec<f64>,
    pub sum: f64,
    /// `1 / (2K)`.
    pub bound: f64,
}

/// Replaces each block `W_i` by `E_i(W_i)` when `Σ ε_i < 1/(2K)`.
pub fn perturb_decomposition(
    d: &Decomposition,
    e_list: &[Matrix],
    eps_list: Option<&[f64]>,
    opts: &NormOptions,
) -> Result<Perturbed> {
    let l = d.len();
    let n = d.ambient.dim();
    if e_list.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: e_list.len(),
        });
    }
    let mut measured = Vec::with_capacity(l);
    for (e, w) in e_list.iter().zip(&d.blocks) {
        if e.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: e.nrows() * e.ncols(),
            });
        }
        let diff = e - Matrix::identity(n, n);
        measured.push(map_norm(&diff, w, opts)?.0);
    }
    let eps: Vec<f64> = match eps_list {
        Some(c) => {
            if c.len() != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    got: c.len(),
                });
            }
            for (i, (&m, &c)) in measured.iter().zip(c).enumerate() {
                if m > c * (1.0 + 1e-12) + 1e-15 {
                    return Err(Error::PerturbationBound {
                        block: i + 1,
                        measured: m,
                        claimed: c,
                    });
                }
            }
            c.to_vec()
        }
        None => measured.clone(),
    };
    let sum: f64 = eps.iter().sum();
    let bound = 1.0 / (2.0 * d.constant());
    if sum >= bound {
        return Err(Error::PerturbationHypothesis { sum, bound });
    }
    let mut blocks = Vec::with_capacity(l);
    for (i, (e, w)) in e_list.iter().zip(&d.blocks).enumerate() {
        let img = e * w.basis();
        let r = linalg::rank(&img, tol::RANK);
        if r < w.dim() {
            return Err(Error::RankCollapse {
                rank: r,
                expected: w.dim(),
            });
        }
        blocks.push(Subspace::new(d.ambient.clone(), img, format!("E{}W{}", i + 1, i + 1))?);
    }
    let decomposition = Decomposition::new(d.ambient.clone(), blocks, opts)?;
    Ok(Perturbed {
        decomposition,
        measured,
        eps,
        sum,
        bound,
    })
}

/// Random `E_i = I + t_i G_i` restricted to the blocks, scaled so that
/// `||(E_i - I)|W_i|| = eps_i` exactly.
pub fn random_perturbations(d: &Decomposition, eps: &[f64], seed: u64, opts: &NormOptions) -> Result<Vec<Matrix>> {
    let n = d.ambient.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(d.len());
    for (i, w) in d.blocks.iter().enumerate() {
        let g = Matrix::from_fn(n, n, |_, _| gaussian(&mut rng));
        // act only on W_i: G Π_i with Π_i the canonical block projection
        let pi = d.canonical(i + 1) - d.canonical(i);
        let gp = g * pi;
        let (v, _) = map_norm(&gp, w, opts)?;
        let scale = if v > 0.0 { eps[i] / v } else { 0.0 };
        out.push(Matrix::identity(n, n) + gp * scale);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// blocking

#[derive(Debug, Clone)]
pub struct Blocking {
    /// `V_1, ..., V_k, Y_{k+1}, V_{m+2}, ...`.
    pub blocking: Decomposition,
    /// The same with `Y_{k+1}` replaced by `A(Y_{k+1})`.
    pub perturbed: Decomposition,
    /// `A` on `V_1 ⊕ ... ⊕ V_{m+1}`, ambient matrix.
    pub a: Matrix,
    /// 1-based index as in the construction.
    pub m: usize,
    pub delta: f64,
    /// `||(A - I)|Y_{k+1}||` (must be at most `eps`).
    pub small_residual: f64,
    /// Distance of `A(Y_{k+1})` to `lin(V_1..V_{m+1} ∪ H)`.
    pub inclusion_residual: f64,
    /// Distance of `H` to `V_1 ⊕ ... ⊕ V_k ⊕ A(Y_{k+1})`.
    pub span_residual: f64,
    /// `max |A v - v|` over a basis of `V_1 ⊕ ... ⊕ V_k`.
    pub fixed_residual: f64,
}

impl Blocking {
    /// `A(Y_{k+1})`.
    pub fn new_block(&self, k: usize) -> &Subspace {
        &self.perturbed.blocks()[k]
    }
}

/// One application of the blocking construction with `H ⊇ V_1 ⊕ ... ⊕ V_k`.
pub fn blocking_step(d: &Decomposition, h: &Subspace, k: usize, eps: f64, opts: &NormOptions) -> Result<Blocking> {
    let l = d.len();
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    if k >= l {
        return Err(Error::Exhausted { best_delta: f64::NAN });
    }
    for (i, w) in d.blocks[..k].iter().enumerate() {
        let r = h.containment_residual(w);
        if r > tol::LINALG {
            return Err(Error::Inclusion(format!("block {} is not inside H (residual {r:e})", i + 1)));
        }
    }
    let n = d.ambient.dim();
    let eye = Matrix::identity(n, n);
    let mut delta = eps / 4.0;
    let mut best = f64::INFINITY;
    while delta > 1e-14 {
        // least m >= k with ||(S_{m+1} - I)|H|| <= delta
        let mut chosen = None;
        for m in k..l {
            let diff = d.canonical(m + 1) - &eye;
            if map_norm(&diff, h, opts)?.0 <= delta {
                chosen = Some(m);
                break;
            }
        }
        let Some(m) = chosen else {
            delta *= 0.5;
            continue;
        };
        let s = d.canonical(m + 1);
        let hb = h.basis();
        let ub = &s * hb;
        if linalg::rank(&ub, tol::RANK) < h.dim() {
            delta *= 0.5;
            continue;
        }
        let z = d.partial_sum(m + 1);
        let cb = linalg::relative_complement(&linalg::orthonormal_basis(&ub, tol::RANK), z.basis(), tol::RANK);
        let src = linalg::hstack(&[&ub, &cb]);
        let dst = linalg::hstack(&[hb, &cb]);
        let a = &dst * linalg::pinv(&src);
        // Y_{k+1} = V_{k+1} ⊕ ... ⊕ V_{m+1}
        let yrefs: Vec<&Matrix> = d.blocks[k..=m].iter().map(|b| b.basis()).collect();
        let yb = linalg::hstack(&yrefs);
        let y = Subspace::new(d.ambient.clone(), yb.clone(), format!("Y{}", k + 1))?;
        let small = map_norm(&(&a - &eye), &y, opts)?.0;
        best = best.min(small);
        if small > eps {
            delta *= 0.5;
            continue;
        }
        let ay = &a * &yb;
        let lin = linalg::orthonormal_basis(&linalg::hstack(&[z.basis(), hb]), tol::RANK);
        let inclusion_residual = linalg::span_residual(&lin, &ay);
        let mut head: Vec<&Matrix> = d.blocks[..k].iter().map(|b| b.basis()).collect();
        head.push(&ay);
        let target = linalg::hstack(&head);
        let span_residual = linalg::span_residual(&target, hb);
        let fixed_residual = if k == 0 {
            0.0
        } else {
            let vb = linalg::hstack(&d.blocks[..k].iter().map(|b| b.basis()).collect::<Vec<_>>());
            (&a * &vb - &vb).amax()
        };
        let mut blocked = d.blocks[..k].to_vec();
        blocked.push(y);
        blocked.extend(d.blocks[m + 1..].iter().cloned());
        let blocking = Decomposition::new(d.ambient.clone(), blocked, opts)?;
        let mut moved = d.blocks[..k].to_vec();
        moved.push(Subspace::new(d.ambient.clone(), ay, format!("A(Y{})", k + 1))?);
        moved.extend(d.blocks[m + 1..].iter().cloned());
        let perturbed = Decomposition::new(d.ambient.clone(), moved, opts)?;
        return Ok(Blocking {
            blocking,
            perturbed,
            a,
            m,
            delta,
            small_residual: small,
            inclusion_residual,
            span_residual,
            fixed_residual,
        });
    }
    Err(Error::Exhausted { best_delta: best })
}

// ---------------------------------------------------------------------------
// interlaced systems

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OuterChoice {
    /// Projections along Euclidean complements.
    #[default]
    Orthogonal,
    /// Minimal projections (LP when polyhedral).
    Minimal,
}

/// Partial sums `Z_n` of a decomposition interlaced with a chain `X_n`:
/// `Z_n ⊆ X_n ⊆ Z_{n+1}`, plus projections `Q_n` onto `X_n`.
#[derive(Debug, Clone)]
pub struct InterlacedSystem {
    pub decomposition: Decomposition,
    pub chain: Vec<Subspace>,
    pub outer: Vec<Projection>,
    pub sup_outer: f64,
    pub interlacing_residual: f64,
    /// Per step of the construction: `(eps_j, measured ||(A - I)|Y||)`.
    pub steps: Vec<(f64, f64)>,
    /// Index in the raw chain picked for each `X_n`.
    pub picks: Vec<usize>,
}

impl InterlacedSystem {
    pub fn new(decomposition: Decomposition, chain: Vec<Subspace>, outer: Vec<Projection>, opts: &NormOptions) -> Result<Self> {
        if outer.len() != chain.len() {
            return Err(Error::DimensionMismatch {
                expected: chain.len(),
                got: outer.len(),
            });
        }
        let mut worst = 0.0_f64;
        for (i, x) in chain.iter().enumerate() {
            let zn = decomposition.partial_sum(i + 1);
            let zn1 = decomposition.partial_sum(i + 2);
            let r = x.containment_residual(&zn).max(zn1.containment_residual(x));
            if r > tol::LINALG {
                return Err(Error::Inclusion(format!("Z_{0} ⊆ X_{0} ⊆ Z_{1} fails (residual {r:e})", i + 1, i + 2)));
            }
            worst = worst.max(r);
        }
        let full = Subspace::full(decomposition.ambient.clone());
        let mut sup_outer = 0.0_f64;
        for (q, x) in outer.iter().zip(&chain) {
            if !q.image().same_as(x) || !q.domain().is_full() {
                return Err(Error::Inclusion("outer projection is not onto its chain element".into()));
            }
            sup_outer = sup_outer.max(map_norm(q.matrix(), &full, opts)?.0);
        }
        Ok(InterlacedSystem {
            decomposition,
            chain,
            outer,
            sup_outer,
            interlacing_residual: worst,
            steps: Vec::new(),
            picks: Vec::new(),
        })
    }
}

fn outer_projections(chain: &[Subspace], choice: OuterChoice) -> Result<Vec<Projection>> {
    chain
        .iter()
        .map(|x| {
            let full = Subspace::full(x.ambient().clone());
            match choice {
                OuterChoice::Orthogonal => orthogonal_projection(&full, x),
                OuterChoice::Minimal => Ok(minimal_projection(&full, x, None, &MinProjOptions::default())?.projection),
            }
        })
        .collect()
}

/// `ε_i = 1 / (2^(i+2) K)` for `i = 2, 3, ...` (index 0 and 1 unused).
pub fn default_schedule(k: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| if i < 2 { 0.0 } else { 1.0 / (2f64.powi(i as i32 + 2) * k) })
        .collect()
}

/// Runs the blocking construction along `chain_raw`, producing `Ũ_i` and
/// `X̃_i = X_{n_i}` with `Z̃_i ⊆ X̃_i ⊆ Z̃_{i+1}`.
pub fn build_interlaced(
    d: &Decomposition,
    chain_raw: &[Subspace],
    eps_schedule: Option<&[f64]>,
    outer: OuterChoice,
    opts: &NormOptions,
) -> Result<InterlacedSystem> {
    if chain_raw.is_empty() {
        return Err(Error::Precondition("empty chain".into()));
    }
    Chain::new(chain_raw.to_vec())?;
    for (i, u) in d.blocks.iter().enumerate() {
        if !chain_raw.iter().any(|x| x.contains(u)) {
            return Err(Error::Inclusion(format!("block {} is not inside any chain element", i + 1)));
        }
    }
    let k0 = d.constant();
    let schedule: Vec<f64> = match eps_schedule {
        Some(s) => {
            let mut v = vec![0.0, 0.0];
            v.extend_from_slice(s);
            v
        }
        None => default_schedule(k0, d.len() + 2),
    };
    let budget: f64 = schedule.iter().skip(2).sum();
    if budget >= 1.0 / (2.0 * k0) {
        return Err(Error::PerturbationHypothesis {
            sum: budget,
            bound: 1.0 / (2.0 * k0),
        });
    }
    let first = |u: &Subspace, after: Option<usize>| -> Option<usize> {
        let start = after.map_or(0, |a| a + 1);
        (start..chain_raw.len()).find(|&n| chain_raw[n].contains(u))
    };
    // step 1
    let mut current = d.clone();
    let mut picks = vec![first(&d.blocks[0], None).expect("checked above")];
    let mut steps = Vec::new();
    let mut j = 2;
    loop {
        let k = j - 1;
        if k >= current.len() || j >= schedule.len() {
            break;
        }
        let h = &chain_raw[*picks.last().expect("nonempty")];
        let b = blocking_step(&current, h, k, schedule[j], opts)?;
        let next = b.perturbed.clone();
        let u = next.blocks[k].clone();
        let Some(n) = first(&u, picks.last().copied()) else {
            break;
        };
        steps.push((schedule[j], b.small_residual));
        current = next;
        picks.push(n);
        j += 1;
    }
    // Ũ_1..Ũ_J, then the remaining blocks grouped into one
    let jn = picks.len();
    let mut blocks: Vec<Subspace> = current.blocks[..jn.min(current.len())].to_vec();
    if current.len() > jn {
        let rest: Vec<&Matrix> = current.blocks[jn..].iter().map(|b| b.basis()).collect();
        blocks.push(Subspace::new(d.ambient.clone(), linalg::hstack(&rest), "rest")?);
    }
    let decomposition = Decomposition::new(d.ambient.clone(), blocks, opts)?;
    let chain: Vec<Subspace> = picks.iter().map(|&n| chain_raw[n].clone()).collect();
    let outer = outer_projections(&chain, outer)?;
    let mut sys = InterlacedSystem::new(decomposition, chain, outer, opts)?;
    sys.steps = steps;
    sys.picks = picks;
    Ok(sys)
}

// ---------------------------------------------------------------------------
// commuting construction

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutingCertificates {
    /// `max |P_n x - x|` over bases of `X̃_n`.
    pub fixes_image: f64,
    /// Distance of the columns of `P_n` to `X̃_n`.
    pub image_inclusion: f64,
    pub idempotence: f64,
    /// `max_n |P_n P_{n+1} - P_n|`.
    pub next_law: f64,
    /// `max_{m,n} |P_m P_n - P_min(m,n)|`.
    pub pairwise_law: f64,
    /// `max_n (||P_n|| - bound_n)`; nonpositive when the norm bound holds.
    pub bound_excess: f64,
}

#[derive(Debug, Clone)]
pub struct Commuting {
    pub projections: Vec<Projection>,
    pub norms: Vec<f64>,
    pub bounds: Vec<f64>,
    pub certificates: CommutingCertificates,
}

/// `P_n = R_n + (I - R_n) Q_n (R_{n+1} - R_n)`, certified.
pub fn commuting_construction(s: &InterlacedSystem, opts: &NormOptions) -> Result<Commuting> {
    let d = &s.decomposition;
    let n = d.ambient.dim();
    let eye = Matrix::identity(n, n);
    let full = Subspace::full(d.ambient.clone());
    let len = s.chain.len();
    let rnorm = |i: usize| -> Result<f64> {
        if i > d.len() {
            Ok(1.0)
        } else if i == 0 {
            Ok(0.0)
        } else {
            Ok(map_norm(&d.canonical(i), &full, opts)?.0)
        }
    };
    let mut mats = Vec::with_capacity(len);
    let mut norms = Vec::with_capacity(len);
    let mut bounds = Vec::with_capacity(len);
    let mut cert = CommutingCertificates {
        fixes_image: 0.0,
        image_inclusion: 0.0,
        idempotence: 0.0,
        next_law: 0.0,
        pairwise_law: 0.0,
        bound_excess: f64::NEG_INFINITY,
    };
    for i in 1..=len {
        let r = d.canonical(i);
        let r1 = d.canonical(i + 1);
        let q = s.outer[i - 1].matrix();
        let p = &r + (&eye - &r) * q * (&r1 - &r);
        let x = &s.chain[i - 1];
        let xb = x.basis();
        cert.fixes_image = cert.fixes_image.max((&p * xb - xb).amax());
        cert.image_inclusion = cert.image_inclusion.max(linalg::span_residual(&x.orthonormal_basis(), &p));
        cert.idempotence = cert.idempotence.max((&p * &p - &p).amax());
        let pn = map_norm(&p, &full, opts)?.0;
        let qn = map_norm(q, &full, opts)?.0;
        let (a, b) = (rnorm(i)?, rnorm(i + 1)?);
        let bound = a + (1.0 + a) * qn * (b + a);
        cert.bound_excess = cert.bound_excess.max(pn - bound);
        norms.push(pn);
        bounds.push(bound);
        mats.push(p);
    }
    for i in 0..len {
        if i + 1 < len {
            cert.next_law = cert.next_law.max((&mats[i] * &mats[i + 1] - &mats[i]).amax());
        }
        for j in 0..len {
            let d = &mats[i] * &mats[j] - &mats[i.min(j)];
            cert.pairwise_law = cert.pairwise_law.max(d.amax());
        }
    }
    let checks = [
        ("image fixing", cert.fixes_image, tol::LINALG),
        ("image inclusion", cert.image_inclusion, tol::LINALG),
        ("P_n P_(n+1) = P_n", cert.next_law, tol::LINALG),
        ("P_m P_n = P_min", cert.pairwise_law, tol::LINALG),
        ("norm bound", cert.bound_excess.max(0.0), 1e-6),
    ];
    for (what, residual, tolerance) in checks {
        if residual > tolerance {
            return Err(Error::Certification {
                what: what.into(),
                residual,
                tolerance,
            });
        }
    }
    let projections = mats
        .into_iter()
        .zip(&s.chain)
        .map(|(m, x)| Projection::new(full.clone(), x.clone(), m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Commuting {
        projections,
        norms,
        bounds,
        certificates: cert,
    })
}

/// The chain `X̃_1 ⊂ ... ⊂ X̃_J ⊂ ambient` with steps `P_n` restricted to
/// `X̃_(n+1)` (the ambient is appended when `X̃_J` is smaller).
pub fn commuting_chain(s: &InterlacedSystem, c: &Commuting) -> Result<Chain> {
    let full = Subspace::full(s.decomposition.ambient.clone());
    let mut subs = s.chain.clone();
    if !subs.last().is_some_and(|x| x.is_full()) {
        subs.push(full);
    }
    let steps = (0..subs.len() - 1)
        .map(|i| Projection::new(subs[i + 1].clone(), subs[i].clone(), c.projections[i].matrix().clone()))
        .collect::<Result<Vec<_>>>()?;
    Chain::new(subs)?.with_steps(steps)
}

// ---------------------------------------------------------------------------
// stabilized products

#[derive(Debug, Clone)]
pub struct StrongLimit {
    /// `T_n = P_n P_{n+1} ... P_{L-1}` on the top element, `T_L = I`.
    pub t: Vec<Projection>,
    pub norms: Vec<f64>,
    pub max_norm: f64,
    pub table_sup: f64,
    /// `max_{i,j} |T_i T_j - T_min(i,j)|`.
    pub commute_residual: f64,
}

pub fn strong_limit_simulation(chain: &Chain, bound_cap: f64, opts: &NormOptions) -> Result<StrongLimit> {
    let subs = chain.subspaces();
    let top = subs.last().expect("nonempty chain");
    if !top.is_full() {
        return Err(Error::Precondition("the top chain element must be the ambient".into()));
    }
    let n = top.ambient_dim();
    let l = subs.len();
    let table_sup = if l >= 2 {
        let steps = chain
            .steps()
            .ok_or_else(|| Error::Precondition("chain has no steps".into()))?;
        let _ = steps;
        composition_table(chain, opts)?.sup
    } else {
        1.0
    };
    if table_sup > bound_cap {
        return Err(Error::CapExceeded {
            value: table_sup,
            cap: bound_cap,
        });
    }
    let steps = chain.steps().unwrap_or(&[]);
    let mut mats = vec![Matrix::identity(n, n); l];
    for i in (0..l.saturating_sub(1)).rev() {
        mats[i] = steps[i].matrix() * &mats[i + 1];
    }
    let mut t = Vec::with_capacity(l);
    let mut norms = Vec::with_capacity(l);
    for (m, x) in mats.iter().zip(subs) {
        let p = Projection::new(top.clone(), x.clone(), m.clone())?;
        norms.push(map_norm(m, top, opts)?.0);
        t.push(p);
    }
    let mut commute_residual = 0.0_f64;
    for i in 0..l {
        for j in 0..l {
            commute_residual = commute_residual.max((&mats[i] * &mats[j] - &mats[i.min(j)]).amax());
        }
    }
    if commute_residual > tol::LINALG {
        return Err(Error::Certification {
            what: "T_i T_j = T_min".into(),
            residual: commute_residual,
            tolerance: tol::LINALG,
        });
    }
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    Ok(StrongLimit {
        t,
        norms,
        max_norm,
        table_sup,
        commute_residual,
    })
}

/// `||x - T_n x||` for `samples` seeded unit vectors, per `n`; reported
/// without any pass/fail meaning.
pub fn convergence_profile(limit: &StrongLimit, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let Some(first) = limit.t.first() else {
        return Ok(Vec::new());
    };
    let amb = first.domain().ambient().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: Vector = amb.sample_sphere(&mut rng)?;
        let mut row = Vec::with_capacity(limit.t.len());
        for t in &limit.t {
            row.push(amb.norm(&(&x - t.matrix() * &x))?);
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn constants_of_simple_decompositions() {
        let o = NormOptions::default();
        let s = Arc::new(NormedSpace::linf(4));
        let d = Decomposition::coordinate(s, &[1, 2, 1], &o).unwrap();
        assert!((d.constant() - 1.0).abs() < 1e-12);
        assert!(d.law_residual() < 1e-12);
        // skewed pair in l_inf^2: S_1 (x, y) = (x - 2y, 0)
        let s2 = Arc::new(NormedSpace::linf(2));
        let w1 = Subspace::from_vectors(s2.clone(), &[v(&[1.0, 0.0])]).unwrap();
        let w2 = Subspace::from_vectors(s2.clone(), &[v(&[1.0, 0.5])]).unwrap();
        let d = Decomposition::new(s2, vec![w1, w2], &o).unwrap();
        assert!((d.constant() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_refusal_and_identity() {
        let o = NormOptions::default();
        let s = Arc::new(NormedSpace::linf(3));
        let d = Decomposition::coordinate(s, &[1, 1, 1], &o).unwrap();
        let eye = vec![Matrix::identity(3, 3); 3];
        let p = perturb_decomposition(&d, &eye, None, &o).unwrap();
        assert_eq!(p.sum, 0.0);
        assert!((p.decomposition.constant() - d.constant()).abs() < 1e-12);
        let mut e = eye.clone();
        e[0][(1, 0)] = 2.0;
        assert!(matches!(
            perturb_decomposition(&d, &e, None, &o),
            Err(Error::PerturbationHypothesis { .. })
        ));
    }

    #[test]
    fn blocking_on_coordinates() {
        let o = NormOptions::default();
        let s = Arc::new(NormedSpace::linf(6));
        let d = Decomposition::coordinate(s.clone(), &[1; 6], &o).unwrap();
        let mut e = vec![Vector::zeros(6); 2];
        e[0][0] = 1.0;
        e[1][1] = 1.0;
        e[1][4] = 0.01;
        let h = Subspace::from_vectors(s, &e).unwrap();
        let b = blocking_step(&d, &h, 1, 0.1, &o).unwrap();
        assert_eq!(b.m, 1);
        assert!(b.small_residual <= 0.1);
        assert!((b.small_residual - 0.01).abs() < 1e-12);
        assert!(b.span_residual <= 1e-8 && b.fixed_residual <= 1e-10);
    }

    #[test]
    fn coordinate_interlacing_collapses_to_partial_sums() {
        let o = NormOptions::default();
        let s = Arc::new(NormedSpace::linf(5));
        let d = Decomposition::coordinate(s.clone(), &[1; 5], &o).unwrap();
        let chain: Vec<Subspace> = (1..=5).map(|i| d.partial_sum(i)).collect();
        let sys = build_interlaced(&d, &chain, None, OuterChoice::Orthogonal, &o).unwrap();
        let c = commuting_construction(&sys, &o).unwrap();
        for (i, p) in c.projections.iter().enumerate() {
            assert!((p.matrix() - d.canonical(i + 1)).amax() < 1e-12);
        }
    }

    #[test]
    fn stabilized_products_of_a_coordinate_chain() {
        let o = NormOptions::default();
        let s = Arc::new(NormedSpace::linf(4));
        let d = Decomposition::coordinate(s.clone(), &[1; 4], &o).unwrap();
        let chain = Chain::new((1..=4).map(|i| d.partial_sum(i)).collect())
            .unwrap()
            .with_orthogonal_steps()
            .unwrap();
        let r = strong_limit_simulation(&chain, 10.0, &o).unwrap();
        assert!(r.commute_residual < 1e-12);
        assert!((r.max_norm - 1.0).abs() < 1e-12);
        let one = Chain::new(vec![Subspace::full(s)]).unwrap();
        let r = strong_limit_simulation(&one, 10.0, &o).unwrap();
        assert!((r.t[0].matrix() - Matrix::identity(4, 4)).amax() == 0.0);
    }
}
