//! Minimizing a maximum of operator norms over an affine matrix family.
//!
//! Each [`AffineTerm`] is `G -> C + L G R`, a map from `domain` into
//! `codomain`. We solve
//!
//! ```text
//! min_G max_j ||T_j(G)||    s.t.  ||T_e(G)|| <= cap_e  for capped terms
//! ```
//!
//! by Kelley's cutting planes. A pair `(v, f)` with `v` in the domain ball and
//! `f` in the codomain dual ball gives the linear minorant
//! `f.(C v) + <(L'f)(R v)', G>` of `||T(G)||`. The pairs come from the exact
//! operator-norm strategies in [`crate::spaces`], so for polyhedral norms
//! only finitely many cuts exist and the method terminates with the exact
//! optimum. The master LP is kept in dual form so new cuts are new columns
//! and every re-solve starts from the previous basis.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::lp::RevisedSimplex;
use crate::spaces::{norm_pairs, NormOptions, NormedSpace};

#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub constant: Matrix,
    pub left: Matrix,
    pub right: Matrix,
    pub domain: Arc<NormedSpace>,
    pub codomain: Arc<NormedSpace>,
    /// `None` for objective terms, `Some(b)` for the constraint `||T|| <= b`.
    pub cap: Option<f64>,
}

impl AffineTerm {
    pub fn new(
        constant: Matrix,
        left: Matrix,
        right: Matrix,
        domain: Arc<NormedSpace>,
        codomain: Arc<NormedSpace>,
    ) -> Result<Self> {
        let (r, c) = constant.shape();
        if r != codomain.dim() || c != domain.dim() || left.nrows() != r || right.ncols() != c {
            return Err(Error::DimensionMismatch {
                expected: r * c,
                got: left.nrows() * right.ncols(),
            });
        }
        Ok(AffineTerm {
            constant,
            left,
            right,
            domain,
            codomain,
            cap: None,
        })
    }

    pub fn capped(mut self, cap: f64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn param_shape(&self) -> (usize, usize) {
        (self.left.ncols(), self.right.nrows())
    }

    pub fn eval(&self, g: &Matrix) -> Matrix {
        if g.nrows() == 0 || g.ncols() == 0 {
            return self.constant.clone();
        }
        &self.constant + &self.left * g * &self.right
    }

    fn cut(&self, v: &Vector, f: &Vector) -> (f64, Vec<f64>) {
        let r = f.dot(&(&self.constant * v));
        let lf = self.left.tr_mul(f);
        let rv = &self.right * v;
        let (p, q) = self.param_shape();
        let mut a = vec![0.0; p * q];
        for b in 0..q {
            for i in 0..p {
                a[i + b * p] = lf[i] * rv[b];
            }
        }
        (r, a)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinMaxOptions {
    pub max_iterations: usize,
    /// Stop when `upper - lower <= gap * max(1, upper)`.
    pub gap: f64,
    /// Largest number of cuts added per term and round.
    pub cuts_per_term: usize,
    /// Accepted relative violation of capped terms.
    pub cap_slack: f64,
    pub norm: NormOptions,
}

impl Default for MinMaxOptions {
    fn default() -> Self {
        MinMaxOptions {
            max_iterations: 2_000,
            gap: 1e-9,
            cuts_per_term: 64,
            cap_slack: 1e-9,
            norm: NormOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinMaxResult {
    pub g: Matrix,
    /// Objective at `g` (an upper bound on the optimum).
    pub value: f64,
    /// Certified lower bound from the master LP.
    pub lower: f64,
    pub iterations: usize,
    pub cuts: usize,
    /// Every norm evaluation used an exact strategy.
    pub exact_norms: bool,
    pub converged: bool,
    /// Norm of each term at `g`.
    pub term_norms: Vec<f64>,
}

impl MinMaxResult {
    pub fn gap(&self) -> f64 {
        (self.value - self.lower).max(0.0)
    }
}

struct Probe {
    objective: f64,
    feasible: bool,
    norms: Vec<f64>,
    exact: bool,
    // (objective?, r, a)
    cuts: Vec<(bool, f64, Vec<f64>)>,
}

/// Norms of every term at `g` plus the cuts violated above `lower`
/// (objective terms) or above the cap (capped terms).
fn probe(terms: &[AffineTerm], g: &Matrix, lower: f64, opts: &MinMaxOptions) -> Result<Probe> {
    let mut out = Probe {
        objective: f64::NEG_INFINITY,
        feasible: true,
        norms: Vec::with_capacity(terms.len()),
        exact: true,
        cuts: Vec::new(),
    };
    for t in terms {
        let m = t.eval(g);
        let threshold = t.cap.unwrap_or(lower);
        let (on, pairs) = norm_pairs(&m, &t.domain, &t.codomain, &opts.norm, threshold, opts.cuts_per_term)?;
        out.exact &= on.is_exact();
        match t.cap {
            None => out.objective = out.objective.max(on.value),
            Some(b) => out.feasible &= on.value <= b * (1.0 + opts.cap_slack) + opts.cap_slack,
        }
        let candidates: Vec<(Vector, Vector)> = if pairs.is_empty() && t.cap.is_none() && lower == f64::NEG_INFINITY {
            vec![(on.witness.clone(), on.functional.clone())]
        } else {
            pairs.into_iter().map(|p| (p.witness, p.functional)).collect()
        };
        for (v, f) in candidates {
            let (r, a) = t.cut(&v, &f);
            match t.cap {
                None => out.cuts.push((true, r, a)),
                Some(b) => out.cuts.push((false, r - b, a)),
            }
        }
        out.norms.push(on.value);
    }
    Ok(out)
}

struct Master {
    lp: RevisedSimplex,
    dim: usize,
    cuts: usize,
}

impl Master {
    /// Box columns come first: `2k` is `x_k <= c_k + d`, `2k+1` is
    /// `-x_k <= d - c_k`.
    fn new(dim: usize) -> Self {
        let mut rhs = vec![0.0; dim + 1];
        rhs[0] = 1.0;
        let mut lp = RevisedSimplex::new(&rhs);
        let mut col = vec![0.0; dim + 1];
        for k in 0..dim {
            for s in [1.0, -1.0] {
                col.iter_mut().for_each(|c| *c = 0.0);
                col[k + 1] = s;
                lp.add_column(&col, 1.0);
            }
        }
        Master { lp, dim, cuts: 0 }
    }

    fn set_box(&mut self, center: &[f64], delta: f64) {
        for (k, &c) in center.iter().enumerate() {
            self.lp.set_cost(2 * k, c + delta);
            self.lp.set_cost(2 * k + 1, delta - c);
        }
    }

    /// Objective cut: `a.x + r <= t`. Capped cut: `a.x + r <= cap` with `r`
    /// already shifted by `-cap`.
    fn push(&mut self, objective: bool, r: f64, a: &[f64]) {
        let mut col = Vec::with_capacity(self.dim + 1);
        col.push(if objective { 1.0 } else { 0.0 });
        col.extend_from_slice(a);
        self.lp.add_column(&col, -r);
        self.cuts += 1;
    }

    /// `(t, x, box weight)`; a zero box weight means `t` bounds the
    /// unconstrained relaxation, not just the box.
    fn solve(&mut self) -> Result<(f64, Vec<f64>, f64)> {
        match self.lp.solve() {
            Ok(()) => {}
            // an unbounded dual means the cuts are inconsistent inside the box
            Err(Error::LpUnbounded) => return Err(Error::LpInfeasible),
            Err(e) => return Err(e),
        }
        let u = self.lp.duals();
        let t = -u[0];
        let x: Vec<f64> = u[1..].to_vec();
        let weight: f64 = (0..2 * self.dim).map(|j| self.lp.value(j)).sum();
        Ok((t, x, weight))
    }
}

fn violation(terms: &[AffineTerm], norms: &[f64]) -> f64 {
    terms
        .iter()
        .zip(norms)
        .filter_map(|(t, &v)| t.cap.map(|b| (v - b).max(0.0)))
        .fold(0.0, f64::max)
}

/// Minimizes `max_j ||T_j(G)||` subject to the capped terms, starting the
/// search at `g0` (which also fixes the parameter shape).
///
/// The master LP is restricted to a box around the best point found so far
/// (the boxstep method); the box grows whenever it blocks progress, and the
/// LP value is only used as a lower bound once no box constraint carries
/// weight.
pub fn minimize_max_norm(terms: &[AffineTerm], g0: &Matrix, opts: &MinMaxOptions) -> Result<MinMaxResult> {
    let (p, q) = g0.shape();
    for t in terms {
        if t.param_shape() != (p, q) {
            return Err(Error::DimensionMismatch {
                expected: p * q,
                got: t.param_shape().0 * t.param_shape().1,
            });
        }
    }
    if !terms.iter().any(|t| t.cap.is_none()) {
        return Err(Error::Precondition("no objective term".into()));
    }
    let dim = p * q;
    let start = probe(terms, g0, f64::NEG_INFINITY, opts)?;
    let mut exact = start.exact;
    if dim == 0 {
        return Ok(MinMaxResult {
            g: g0.clone(),
            value: start.objective,
            lower: start.objective,
            iterations: 0,
            cuts: 0,
            exact_norms: exact,
            converged: start.feasible,
            term_norms: start.norms,
        });
    }

    let scale = start.objective.abs().max(1.0);
    let mut center: Vec<f64> = g0.as_slice().to_vec();
    let mut center_val = start.objective;
    let mut center_viol = violation(terms, &start.norms);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = start
        .feasible
        .then(|| (start.objective, center.clone(), start.norms.clone()));
    let mut delta = 0.5 * (1.0 + g0.amax());
    let mut master = Master::new(dim);
    master.set_box(&center, delta);
    for (obj, r, a) in &start.cuts {
        master.push(*obj, *r, a);
    }

    let mut lower = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (t, x, weight) = match master.solve() {
            Ok(r) => r,
            Err(Error::LpInfeasible) if delta < 1e8 * scale => {
                delta *= 4.0;
                master.set_box(&center, delta);
                continue;
            }
            Err(e) => return Err(e),
        };
        let global = weight <= 1e-12;
        if global {
            lower = lower.max(t);
        }
        if let Some((bv, _, _)) = &best {
            if *bv - lower <= opts.gap * bv.max(1.0) {
                converged = true;
                break;
            }
        }
        let g = Matrix::from_column_slice(p, q, &x);
        let pr = probe(terms, &g, t + 1e-12 * scale, opts)?;
        exact &= pr.exact;
        let viol = violation(terms, &pr.norms);
        if pr.feasible && best.as_ref().map_or(true, |b| pr.objective < b.0) {
            best = Some((pr.objective, x.clone(), pr.norms.clone()));
        }
        if let Some((bv, _, _)) = &best {
            if *bv - lower <= opts.gap * bv.max(1.0) {
                converged = true;
                break;
            }
        }
        let serious = if center_viol > 0.0 {
            viol < center_viol
        } else {
            pr.feasible && pr.objective < center_val - 1e-12 * scale
        };
        let on_edge = x
            .iter()
            .zip(&center)
            .any(|(a, c)| (a - c).abs() >= delta * (1.0 - 1e-9));
        if serious {
            let predicted = center_val - t;
            let ratio = if center_viol > 0.0 || predicted <= 0.0 {
                1.0
            } else {
                (center_val - pr.objective) / predicted
            };
            center = x;
            center_val = pr.objective;
            center_viol = viol;
            if on_edge && ratio > 0.5 {
                delta *= 2.0;
            }
            master.set_box(&center, delta);
        } else if !global && (pr.cuts.is_empty() || t >= center_val - opts.gap * scale) {
            // the box hides the certificate: widen it
            delta *= 4.0;
            master.set_box(&center, delta);
        } else if !global && on_edge && delta > 1e-7 * scale {
            // null step: the model is poor this far from the center
            delta *= 0.5;
            master.set_box(&center, delta);
        }
        if pr.cuts.is_empty() && global {
            // nothing separates the master point and the bound is global
            converged = pr.feasible || best.is_some();
            break;
        }
        for (obj, r, a) in &pr.cuts {
            master.push(*obj, *r, a);
        }
    }
    let Some((value, gv, norms)) = best else {
        return Err(Error::NotConverged {
            lower,
            upper: f64::INFINITY,
        });
    };
    Ok(MinMaxResult {
        g: Matrix::from_column_slice(p, q, &gv),
        value,
        lower: lower.min(value),
        iterations,
        cuts: master.cuts,
        exact_norms: exact,
        converged,
        term_norms: norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_onto_diagonal_of_linf2() {
        // P = P0 + b g w' with b = (1,1)/sqrt2, w = (1,-1)/sqrt2
        let s = Arc::new(NormedSpace::linf(2));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let b = Matrix::from_column_slice(2, 1, &[h, h]);
        let w = Matrix::from_column_slice(2, 1, &[h, -h]);
        let p0 = &b * b.transpose();
        let term = AffineTerm::new(p0, b, w.transpose(), s.clone(), s).unwrap();
        let r = minimize_max_norm(&[term], &Matrix::from_element(1, 1, 0.7), &MinMaxOptions::default()).unwrap();
        assert!(r.converged && r.exact_norms);
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
        // every |g| <= 1 is optimal
        assert!(r.g[(0, 0)].abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn capped_term_is_respected() {
        // minimize |1 + g| subject to |2 - g| <= 0.5 on R (l_inf^1)
        let s = Arc::new(NormedSpace::linf(1));
        let one = Matrix::identity(1, 1);
        let a = AffineTerm::new(one.clone(), one.clone(), one.clone(), s.clone(), s.clone()).unwrap();
        let b = AffineTerm::new(one.clone() * 2.0, -one.clone(), one.clone(), s.clone(), s)
            .unwrap()
            .capped(0.5);
        let r = minimize_max_norm(&[a, b], &Matrix::from_element(1, 1, 2.0), &MinMaxOptions::default()).unwrap();
        assert!((r.g[(0, 0)] - 1.5).abs() < 1e-8);
        assert!((r.value - 2.5).abs() < 1e-8);
    }

    #[test]
    fn infeasible_caps_are_reported() {
        let s = Arc::new(NormedSpace::linf(1));
        let one = Matrix::identity(1, 1);
        let a = AffineTerm::new(one.clone(), one.clone(), one.clone(), s.clone(), s.clone()).unwrap();
        let b = AffineTerm::new(one.clone(), Matrix::zeros(1, 1), one.clone(), s.clone(), s)
            .unwrap()
            .capped(0.5);
        let r = minimize_max_norm(&[a, b], &Matrix::zeros(1, 1), &MinMaxOptions::default());
        assert!(matches!(r, Err(Error::LpInfeasible)));
    }
}
