//! Projections between nested subspaces, factorization through an
//! intermediate subspace, chains of projections and the norms of their
//! compositions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::minmax::{minimize_max_norm, AffineTerm, MinMaxOptions};
use crate::spaces::{restricted_norm, LinearMap, NormCertificate, NormOptions, OperatorNorm};
pub use crate::subspace::Subspace;
use crate::tol;

/// An idempotent map of `domain` onto `image`, stored as an ambient matrix.
#[derive(Debug, Clone)]
pub struct Projection {
    domain: Subspace,
    image: Subspace,
    matrix: Matrix,
    idempotence_residual: f64,
    image_residual: f64,
}

/// `||M||` restricted to `domain`, falling back to the Euclidean norm of
/// the restriction when no strategy applies (used for residuals only).
fn residual_norm(m: &Matrix, domain: &Subspace) -> f64 {
    let q = domain.orthonormal_basis();
    let mq = m * &q;
    if mq.amax() == 0.0 {
        return 0.0;
    }
    match restricted_norm(m, domain, domain.ambient(), &NormOptions::default()) {
        Ok(on) => on.value,
        Err(_) => mq.singular_values().amax(),
    }
}

impl Projection {
    /// Certifies `matrix` as a projection of `domain` onto `image`.
    pub fn new(domain: Subspace, image: Subspace, matrix: Matrix) -> Result<Self> {
        let n = domain.ambient_dim();
        if matrix.shape() != (n, n) || image.ambient_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: matrix.nrows() * matrix.ncols(),
            });
        }
        let r = domain.containment_residual(&image);
        if r > tol::LINALG {
            return Err(Error::Inclusion(format!(
                "image is not inside the domain (residual {r:e})"
            )));
        }
        let scale = linalg::max_abs(&matrix).max(1.0);
        let sq = &matrix * &matrix - &matrix;
        let idem = residual_norm(&sq, &domain);
        // P maps the domain into the image and fixes the image
        let qi = image.orthonormal_basis();
        let fix = if qi.ncols() == 0 {
            0.0
        } else {
            linalg::max_abs(&(&matrix * &qi - &qi))
        };
        let into = linalg::span_residual(&qi, &(&matrix * domain.orthonormal_basis()));
        let img = fix.max(if qi.ncols() == 0 {
            linalg::max_abs(&(&matrix * domain.orthonormal_basis()))
        } else {
            into
        });
        if idem > tol::LINALG * scale {
            return Err(Error::Certification {
                what: "idempotence".into(),
                residual: idem,
                tolerance: tol::LINALG * scale,
            });
        }
        if img > tol::LINALG * scale {
            return Err(Error::Certification {
                what: "image".into(),
                residual: img,
                tolerance: tol::LINALG * scale,
            });
        }
        Ok(Projection {
            domain,
            image,
            matrix,
            idempotence_residual: idem,
            image_residual: img,
        })
    }

    pub fn identity(space: &Subspace) -> Self {
        let m = linalg::orthogonal_projector(space.basis());
        Projection {
            domain: space.clone(),
            image: space.clone(),
            matrix: m,
            idempotence_residual: 0.0,
            image_residual: 0.0,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn domain(&self) -> &Subspace {
        &self.domain
    }

    pub fn image(&self) -> &Subspace {
        &self.image
    }

    pub fn idempotence_residual(&self) -> f64 {
        self.idempotence_residual
    }

    pub fn image_residual(&self) -> f64 {
        self.image_residual
    }

    /// `ker P` inside the domain.
    pub fn kernel(&self) -> Result<Subspace> {
        let e = self.domain.basis();
        let ns = linalg::null_space(&(&self.matrix * e), 1e-9);
        let k = linalg::orthonormal_basis(&(e * ns), tol::RANK);
        Subspace::new(self.domain.ambient().clone(), k, "ker")
    }

    pub fn norm(&self, opts: &NormOptions) -> Result<OperatorNorm> {
        restricted_norm(&self.matrix, &self.domain, self.domain.ambient(), opts)
    }

    pub fn as_map(&self) -> LinearMap {
        LinearMap {
            domain: self.domain.clone(),
            codomain: self.image.clone(),
            matrix: self.matrix.clone(),
        }
    }

    /// `self ∘ inner`, a projection of `inner.domain` onto `self.image`;
    /// requires `im inner ⊂ dom self` and `im self ⊂ im inner`.
    pub fn compose(&self, inner: &Projection) -> Result<Projection> {
        if !self.domain.contains(&inner.image) {
            return Err(Error::Inclusion("inner image is not inside the outer domain".into()));
        }
        Projection::new(
            inner.domain.clone(),
            self.image.clone(),
            &self.matrix * &inner.matrix,
        )
    }
}

/// The projection of `domain` onto `target` along `kernel`.
pub fn make_projection(domain: &Subspace, target: &Subspace, kernel: &Subspace) -> Result<Projection> {
    for (s, name) in [(target, "target"), (kernel, "kernel")] {
        let r = domain.containment_residual(s);
        if r > tol::LINALG {
            return Err(Error::Inclusion(format!("{name} is not inside the domain (residual {r:e})")));
        }
    }
    let m = linalg::hstack(&[target.basis(), kernel.basis()]);
    let r = linalg::rank(&m, tol::RANK);
    if r < m.ncols() {
        return Err(Error::NotDirectSum(format!(
            "target and kernel intersect (rank {r} < {})",
            m.ncols()
        )));
    }
    if m.ncols() != domain.dim() {
        return Err(Error::NotDirectSum(format!(
            "target + kernel has dimension {}, domain has {}",
            m.ncols(),
            domain.dim()
        )));
    }
    let k = target.dim();
    let pinv = linalg::pinv(&m);
    let mat = target.basis() * pinv.rows(0, k);
    Projection::new(domain.clone(), target.clone(), mat)
}

/// Projection of `domain` onto `target` along the Euclidean complement of
/// `target` inside `domain`.
pub fn orthogonal_projection(domain: &Subspace, target: &Subspace) -> Result<Projection> {
    let c = linalg::relative_complement(target.basis(), domain.basis(), tol::RANK);
    let kernel = Subspace::new(domain.ambient().clone(), c, "")?;
    make_projection(domain, target, &kernel)
}

/// Factors a projection `P` of `X3` onto `X1` as `P = P1 P2` through `X2`,
/// with `P1 = P|X2` and `ker P2` the Euclidean complement of `ker P1` inside
/// `ker P`.
pub fn factor_through(p: &Projection, x2: &Subspace) -> Result<(Projection, Projection)> {
    let x1 = p.image();
    let x3 = p.domain();
    if !x2.contains(x1) {
        return Err(Error::Inclusion("X1 is not inside X2".into()));
    }
    if !x3.contains(x2) {
        return Err(Error::Inclusion("X2 is not inside X3".into()));
    }
    let ker = p.kernel()?;
    let ker1 = ker.intersection(x2)?;
    let c = linalg::relative_complement(ker1.basis(), ker.basis(), tol::RANK);
    let c = Subspace::new(x3.ambient().clone(), c, "")?;
    let p2 = make_projection(x3, x2, &c)?;
    let pr = linalg::orthogonal_projector(x2.basis());
    let p1 = Projection::new(x2.clone(), x1.clone(), p.matrix() * pr)?;
    Ok((p1, p2))
}

// ---------------------------------------------------------------------------
// chains

#[derive(Debug, Clone)]
pub struct Chain {
    subspaces: Vec<Subspace>,
    steps: Option<Vec<Projection>>,
}

impl Chain {
    pub fn new(subspaces: Vec<Subspace>) -> Result<Self> {
        if subspaces.is_empty() {
            return Err(Error::Precondition("empty chain".into()));
        }
        let n = subspaces[0].ambient_dim();
        for w in subspaces.windows(2) {
            if w[1].ambient_dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: w[1].ambient_dim(),
                });
            }
            let r = w[1].containment_residual(&w[0]);
            if r > 1e-10 {
                return Err(Error::Inclusion(format!("chain is not increasing (residual {r:e})")));
            }
        }
        Ok(Chain {
            subspaces,
            steps: None,
        })
    }

    /// Attaches steps `P_n : X_{n+1} -> X_n`.
    pub fn with_steps(mut self, steps: Vec<Projection>) -> Result<Self> {
        if steps.len() + 1 != self.subspaces.len() {
            return Err(Error::DimensionMismatch {
                expected: self.subspaces.len() - 1,
                got: steps.len(),
            });
        }
        for (n, s) in steps.iter().enumerate() {
            if !s.domain().same_as(&self.subspaces[n + 1]) || !s.image().same_as(&self.subspaces[n]) {
                return Err(Error::Inclusion(format!("step {} does not map X_{} onto X_{}", n + 1, n + 2, n + 1)));
            }
        }
        self.steps = Some(steps);
        Ok(self)
    }

    /// Steps along Euclidean complements.
    pub fn with_orthogonal_steps(self) -> Result<Self> {
        let steps = self
            .subspaces
            .windows(2)
            .map(|w| orthogonal_projection(&w[1], &w[0]))
            .collect::<Result<Vec<_>>>()?;
        self.with_steps(steps)
    }

    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn steps(&self) -> Option<&[Projection]> {
        self.steps.as_deref()
    }

    /// The first `len` subspaces (and their steps).
    pub fn truncate(&self, len: usize) -> Chain {
        let len = len.clamp(1, self.len());
        Chain {
            subspaces: self.subspaces[..len].to_vec(),
            steps: self.steps.as_ref().map(|s| s[..len - 1].to_vec()),
        }
    }

    /// The chain restricted to the indices `picks` (0-based, increasing), with
    /// steps composed between picked indices.
    pub fn subsequence(&self, picks: &[usize]) -> Result<Chain> {
        if picks.windows(2).any(|w| w[0] >= w[1]) || picks.iter().any(|&i| i >= self.len()) {
            return Err(Error::Precondition("subsequence indices must increase within the chain".into()));
        }
        let subs: Vec<Subspace> = picks.iter().map(|&i| self.subspaces[i].clone()).collect();
        let chain = Chain::new(subs)?;
        match &self.steps {
            None => Ok(chain),
            Some(steps) => {
                let mut out = Vec::new();
                for w in picks.windows(2) {
                    let mut m = Matrix::identity(self.subspaces[0].ambient_dim(), self.subspaces[0].ambient_dim());
                    for s in &steps[w[0]..w[1]] {
                        m *= s.matrix();
                    }
                    out.push(Projection::new(
                        self.subspaces[w[1]].clone(),
                        self.subspaces[w[0]].clone(),
                        m,
                    )?);
                }
                chain.with_steps(out)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    /// 1-based, as in `M(k, l) = ||P_k ... P_l||`.
    pub k: usize,
    pub l: usize,
    pub norm: f64,
    pub certificate: NormCertificate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositionTable {
    pub length: usize,
    pub entries: Vec<TableEntry>,
    pub sup: f64,
    pub argmax: (usize, usize),
}

impl CompositionTable {
    pub fn get(&self, k: usize, l: usize) -> Option<&TableEntry> {
        self.entries.iter().find(|e| e.k == k && e.l == l)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,l,norm,certificate\n");
        for e in &self.entries {
            let c = match e.certificate {
                NormCertificate::Exact => "exact".to_string(),
                NormCertificate::Bracket { lower, upper } => format!("bracket[{lower:.12e};{upper:.12e}]"),
            };
            let _ = writeln!(s, "{},{},{:.12e},{}", e.k, e.l, e.norm, c);
        }
        s
    }
}

fn products(steps: &[Projection], subspaces: &[Subspace], opts: &NormOptions) -> Result<Vec<TableEntry>> {
    let n = subspaces[0].ambient_dim();
    let mut entries = Vec::new();
    for k in 0..steps.len() {
        let mut prod = Matrix::identity(n, n);
        for l in k..steps.len() {
            prod = &prod * steps[l].matrix();
            let on = restricted_norm(&prod, &subspaces[l + 1], subspaces[0].ambient(), opts)?;
            entries.push(TableEntry {
                k: k + 1,
                l: l + 1,
                norm: on.value,
                certificate: on.certificate,
            });
        }
    }
    Ok(entries)
}

/// `M(k, l) = ||P_k P_{k+1} ... P_l||` from `X_{l+1}` into `X_k` for all
/// `1 <= k <= l < L`.
pub fn composition_table(chain: &Chain, opts: &NormOptions) -> Result<CompositionTable> {
    let steps = chain
        .steps()
        .ok_or_else(|| Error::Precondition("chain has no steps".into()))?;
    let entries = products(steps, chain.subspaces(), opts)?;
    let (sup, argmax) = entries
        .iter()
        .fold((f64::NEG_INFINITY, (0, 0)), |acc, e| if e.norm > acc.0 { (e.norm, (e.k, e.l)) } else { acc });
    Ok(CompositionTable {
        length: chain.len(),
        entries,
        sup: if sup.is_finite() { sup } else { 0.0 },
        argmax,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BlowupOptions {
    pub sweeps: usize,
    pub minmax: MinMaxOptions,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions {
            sweeps: 50,
            minmax: MinMaxOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlowupResult {
    pub chain: Chain,
    pub sup: f64,
    /// Sup of the table for Euclidean-orthogonal steps.
    pub default_sup: f64,
    pub sweeps: usize,
    /// The sweep budget ran out while the objective was still moving.
    pub budget_exhausted: bool,
}

struct StepFamily {
    p0: Matrix,
    b: Matrix,
    nt: Matrix,
}

impl StepFamily {
    fn matrix(&self, g: &Matrix) -> Matrix {
        if g.nrows() == 0 || g.ncols() == 0 {
            return self.p0.clone();
        }
        &self.p0 + &self.b * g * &self.nt
    }
}

/// Chooses steps by cyclic coordinate descent: each sweep re-optimizes one
/// step at a time, exactly, over all table entries that involve it.
pub fn minimize_chain_blowup(chain: &Chain, opts: &BlowupOptions) -> Result<BlowupResult> {
    let subs = chain.subspaces();
    let n = subs[0].ambient_dim();
    let base = Chain::new(subs.to_vec())?;
    let default = base.clone().with_orthogonal_steps()?;
    if subs.len() < 2 {
        return Ok(BlowupResult {
            chain: default,
            sup: 0.0,
            default_sup: 0.0,
            sweeps: 0,
            budget_exhausted: false,
        });
    }
    let default_sup = composition_table(&default, &opts.minmax.norm)?.sup;
    let families: Vec<StepFamily> = subs
        .windows(2)
        .map(|w| {
            let b = w[0].orthonormal_basis();
            let nb = linalg::relative_complement(w[0].basis(), w[1].basis(), tol::RANK);
            StepFamily {
                p0: &b * b.transpose(),
                nt: nb.transpose(),
                b,
            }
        })
        .collect();
    let frames = subs.iter().map(|s| s.frame()).collect::<Result<Vec<_>>>()?;
    let steps_n = families.len();
    let mut gs: Vec<Matrix> = families.iter().map(|f| Matrix::zeros(f.b.ncols(), f.nt.nrows())).collect();
    let mut mats: Vec<Matrix> = families.iter().zip(&gs).map(|(f, g)| f.matrix(g)).collect();
    let mut current = default_sup;
    let mut sweeps = 0;
    let mut exhausted = true;
    let ambient = subs[0].ambient().clone();
    while sweeps < opts.sweeps {
        sweeps += 1;
        let before = current;
        for j in 0..steps_n {
            let fam = &families[j];
            let mut terms = Vec::new();
            for k in 0..=j {
                let mut a = Matrix::identity(n, n);
                for m in &mats[k..j] {
                    a = &a * m;
                }
                let mut c = Matrix::identity(n, n);
                for l in j..steps_n {
                    if l > j {
                        c = &c * &mats[l];
                    }
                    let (e, dom) = &frames[l + 1];
                    let ce = &c * e;
                    terms.push(AffineTerm::new(
                        &a * &fam.p0 * &ce,
                        &a * &fam.b,
                        &fam.nt * &ce,
                        dom.clone(),
                        ambient.clone(),
                    )?);
                }
            }
            // the start point is a candidate, so this never increases the sup
            let res = minimize_max_norm(&terms, &gs[j], &opts.minmax)?;
            gs[j] = res.g;
            mats[j] = fam.matrix(&gs[j]);
        }
        let steps = steps_from(&mats, subs)?;
        current = composition_table(&base.clone().with_steps(steps)?, &opts.minmax.norm)?.sup;
        if before - current <= 1e-9 * current.max(1.0) {
            exhausted = false;
            break;
        }
    }
    let steps = steps_from(&mats, subs)?;
    let out = base.with_steps(steps)?;
    let sup = composition_table(&out, &opts.minmax.norm)?.sup;
    Ok(BlowupResult {
        chain: out,
        sup,
        default_sup,
        sweeps,
        budget_exhausted: exhausted,
    })
}

fn steps_from(mats: &[Matrix], subs: &[Subspace]) -> Result<Vec<Projection>> {
    mats.iter()
        .enumerate()
        .map(|(j, m)| Projection::new(subs[j + 1].clone(), subs[j].clone(), m.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::spaces::NormedSpace;
    use std::sync::Arc;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn coord(space: &Arc<NormedSpace>, idx: &[usize]) -> Subspace {
        let n = space.dim();
        let cols: Vec<Vector> = idx
            .iter()
            .map(|&i| {
                let mut e = Vector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
        Subspace::from_vectors(space.clone(), &cols).unwrap()
    }

    #[test]
    fn coordinate_and_averaging_projections() {
        let s = Arc::new(NormedSpace::linf(2));
        let full = Subspace::full(s.clone());
        let p = make_projection(&full, &coord(&s, &[0]), &coord(&s, &[1])).unwrap();
        assert!((p.matrix() - Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-14);

        let diag = Subspace::from_vectors(s.clone(), &[v(&[1.0, 1.0])]).unwrap();
        let anti = Subspace::from_vectors(s.clone(), &[v(&[1.0, -1.0])]).unwrap();
        let avg = make_projection(&full, &diag, &anti).unwrap();
        assert!((avg.norm(&NormOptions::default()).unwrap().value - 1.0).abs() < 1e-14);

        assert!(matches!(make_projection(&full, &diag, &diag), Err(Error::NotDirectSum(_))));
    }

    #[test]
    fn factorization_of_coordinate_triple() {
        let s = Arc::new(NormedSpace::linf(3));
        let full = Subspace::full(s.clone());
        let x1 = coord(&s, &[0]);
        let x2 = coord(&s, &[0, 1]);
        let p = make_projection(&full, &x1, &coord(&s, &[1, 2])).unwrap();
        let (p1, p2) = factor_through(&p, &x2).unwrap();
        assert!((p1.matrix() * p2.matrix() - p.matrix()).amax() < 1e-14);
        let (q1, q2) = factor_through(&p, &x1).unwrap();
        assert!((q2.matrix() - p.matrix()).amax() < 1e-12);
        assert!((q1.matrix() - Matrix::from_diagonal(&v(&[1.0, 0.0, 0.0]))).amax() < 1e-12);
        let (r1, r2) = factor_through(&p, &full).unwrap();
        assert!((r2.matrix() - Matrix::identity(3, 3)).amax() < 1e-12);
        assert!((r1.matrix() - p.matrix()).amax() < 1e-12);
    }

    #[test]
    fn coordinate_chain_table_is_one() {
        let s = Arc::new(NormedSpace::linf(4));
        let subs: Vec<Subspace> = (1..=4).map(|k| coord(&s, &(0..k).collect::<Vec<_>>())).collect();
        let chain = Chain::new(subs).unwrap().with_orthogonal_steps().unwrap();
        let t = composition_table(&chain, &NormOptions::default()).unwrap();
        assert_eq!(t.entries.len(), 6);
        assert!(t.entries.iter().all(|e| (e.norm - 1.0).abs() < 1e-12));
        assert!(t.to_csv().starts_with("k,l,norm,certificate\n1,1,"));
    }

    #[test]
    fn single_step_blowup_is_minimal_projection() {
        let s = Arc::new(NormedSpace::linf(2));
        let diag = Subspace::from_vectors(s.clone(), &[v(&[1.0, 1.0])]).unwrap();
        let chain = Chain::new(vec![diag, Subspace::full(s)]).unwrap();
        let r = minimize_chain_blowup(&chain, &BlowupOptions::default()).unwrap();
        assert!((r.sup - 1.0).abs() < 1e-9);
    }
}
