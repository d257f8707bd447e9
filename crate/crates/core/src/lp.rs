//! Dense revised simplex.
//!
//! [`RevisedSimplex`] solves `min c'x  s.t.  A x = b, x >= 0` with an explicit
//! basis inverse, a phase-one on artificial columns, Dantzig pricing and a
//! switch to Bland's rule after a streak of degenerate pivots. Columns may be
//! appended after a solve; the next [`RevisedSimplex::solve`] resumes from the
//! current basis, which is what the cutting-plane master in
//! [`crate::minmax`] relies on.
//!
//! [`LinearProgram`] is a small modelling layer (free variables, `<=`, `>=`,
//! `=` rows) that lowers to standard form and checks the answer against the
//! original rows.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

const PIVOT_TOL: f64 = 1e-9;
const BLAND_AFTER: usize = 40;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone)]
pub struct RevisedSimplex {
    m: usize,
    b: Vector,
    row_sign: Vec<f64>,
    // artificial columns are the first `m` indices
    cols: Vec<Vector>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Matrix,
    xb: Vector,
    feasible: bool,
    since_refactor: usize,
    pub max_iterations: usize,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

impl RevisedSimplex {
    pub fn new(b: &[f64]) -> Self {
        let m = b.len();
        let row_sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let bv = Vector::from_iterator(m, b.iter().zip(&row_sign).map(|(v, s)| v * s));
        let mut cols = Vec::with_capacity(m);
        for i in 0..m {
            let mut e = Vector::zeros(m);
            e[i] = 1.0;
            cols.push(e);
        }
        RevisedSimplex {
            m,
            xb: bv.clone(),
            b: bv,
            row_sign,
            cols,
            cost: vec![0.0; m],
            basis: (0..m).collect(),
            in_basis: vec![true; m],
            binv: Matrix::identity(m, m),
            feasible: m == 0,
            since_refactor: 0,
            max_iterations: 200_000,
            pivots: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn num_columns(&self) -> usize {
        self.cols.len() - self.m
    }

    /// Append a structural column; returns its index among structural columns.
    pub fn add_column(&mut self, col: &[f64], cost: f64) -> usize {
        assert_eq!(col.len(), self.m, "column length");
        let v = Vector::from_iterator(self.m, col.iter().zip(&self.row_sign).map(|(a, s)| a * s));
        self.cols.push(v);
        self.cost.push(cost);
        self.in_basis.push(false);
        self.cols.len() - 1 - self.m
    }

    /// Changes the cost of a structural column; the basis stays primal
    /// feasible, so the next solve continues in phase two.
    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.cost[j + self.m] = cost;
    }

    /// Value of structural column `j` in the current basic solution.
    pub fn value(&self, j: usize) -> f64 {
        let col = j + self.m;
        if !self.in_basis[col] {
            return 0.0;
        }
        self.basis
            .iter()
            .position(|&b| b == col)
            .map(|i| self.xb[i].max(0.0))
            .unwrap_or(0.0)
    }

    fn is_artificial(&self, j: usize) -> bool {
        j < self.m
    }

    fn phase_cost(&self, j: usize, phase: Phase) -> f64 {
        match phase {
            Phase::One => {
                if self.is_artificial(j) {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if self.is_artificial(j) {
                    0.0
                } else {
                    self.cost[j]
                }
            }
        }
    }

    fn multipliers(&self, phase: Phase) -> Vector {
        let cb = Vector::from_iterator(self.m, self.basis.iter().map(|&j| self.phase_cost(j, phase)));
        self.binv.tr_mul(&cb)
    }

    fn refactor(&mut self) -> Result<()> {
        let mut bm = Matrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            bm.set_column(i, &self.cols[j]);
        }
        let inv = bm
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::LpFailed("singular basis".into()))?;
        self.binv = inv;
        self.xb = &self.binv * &self.b;
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -1e-9 {
                *v = 0.0;
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize, w: &Vector) -> Result<()> {
        let piv = w[r];
        let theta = self.xb[r] / piv;
        for i in 0..self.m {
            if i != r {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-11 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        let row_r = self.binv.row(r).into_owned() / piv;
        for i in 0..self.m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                for j in 0..self.m {
                    self.binv[(i, j)] -= f * row_r[j];
                }
            }
        }
        self.binv.set_row(r, &row_r);
        let old = self.basis[r];
        self.in_basis[old] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn ratio_test(&self, w: &Vector, tol: f64, phase: Phase, bland: bool) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.m {
            // a basic artificial sitting at zero must leave before it can grow
            if phase == Phase::Two && self.is_artificial(self.basis[i]) && w[i].abs() > tol {
                return Some((i, 0.0));
            }
            if w[i] > tol {
                let ratio = self.xb[i].max(0.0) / w[i];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                w[i] > w[li]
                            }
                        } else {
                            ratio < lr
                        };
                        if better {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        leave
    }

    fn run(&mut self, phase: Phase) -> Result<()> {
        let scale = self
            .cost
            .iter()
            .fold(1.0_f64, |a, &c| a.max(c.abs()));
        let opt_tol = 1e-11 * scale;
        let mut degenerate = 0usize;
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > self.max_iterations {
                return Err(Error::LpFailed("iteration limit".into()));
            }
            let u = self.multipliers(phase);
            let bland = degenerate > BLAND_AFTER;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if self.in_basis[j] || self.is_artificial(j) {
                    continue;
                }
                let d = self.phase_cost(j, phase) - u.dot(&self.cols[j]);
                if d < -opt_tol {
                    if bland {
                        enter = Some((j, d));
                        break;
                    }
                    match enter {
                        Some((_, best)) if best <= d => {}
                        _ => enter = Some((j, d)),
                    }
                }
            }
            let Some((q, _)) = enter else {
                return Ok(());
            };
            let w = &self.binv * &self.cols[q];
            let wmax = w.amax().max(1.0);
            let mut leave = self.ratio_test(&w, PIVOT_TOL * wmax, phase, bland);
            if leave.is_none() {
                // an ill-conditioned basis can dwarf genuine pivots
                leave = self.ratio_test(&w, 1e-12 * self.cols[q].amax().max(1.0), phase, bland);
            }
            let Some((r, theta)) = leave else {
                return Err(Error::LpUnbounded);
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &w)?;
        }
    }

    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let rho = self.binv.row(r).into_owned();
            let mut best: Option<(usize, f64)> = None;
            for j in self.m..self.cols.len() {
                if self.in_basis[j] {
                    continue;
                }
                let a = (&rho * &self.cols[j])[0];
                if a.abs() > 1e-7 && best.map_or(true, |(_, b)| a.abs() > b.abs()) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                let w = &self.binv * &self.cols[j];
                self.pivot(r, j, &w)?;
            }
        }
        Ok(())
    }

    /// Solve (or re-solve after new columns) to optimality.
    pub fn solve(&mut self) -> Result<()> {
        if !self.feasible {
            self.run(Phase::One)?;
            let infeas: f64 = self
                .basis
                .iter()
                .zip(self.xb.iter())
                .filter(|(&j, _)| self.is_artificial(j))
                .map(|(_, &x)| x)
                .sum();
            let bscale = self.b.amax().max(1.0);
            if infeas > 1e-8 * bscale {
                return Err(Error::LpInfeasible);
            }
            self.drive_out_artificials()?;
            self.feasible = true;
        }
        self.run(Phase::Two)?;
        self.refactor()?;
        Ok(())
    }

    /// Values of the structural columns.
    pub fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.cols.len() - self.m];
        for (i, &j) in self.basis.iter().enumerate() {
            if !self.is_artificial(j) {
                x[j - self.m] = self.xb[i].max(0.0);
            }
        }
        x
    }

    pub fn objective(&self) -> f64 {
        self.primal()
            .iter()
            .enumerate()
            .map(|(k, x)| x * self.cost[k + self.m])
            .sum()
    }

    /// Simplex multipliers `u` with `c_j - a_j'u >= 0` at optimality, in the
    /// sign convention of the rows as supplied.
    pub fn duals(&self) -> Vec<f64> {
        let u = self.multipliers(Phase::Two);
        u.iter().zip(&self.row_sign).map(|(v, s)| v * s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    Free,
    NonNegative,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// `min c'x` (or max) over dense rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    bounds: Vec<VarBound>,
    objective: Vec<f64>,
    maximize: bool,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row, sign convention of a minimization.
    pub duals: Vec<f64>,
    pub primal_residual: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(bounds: Vec<VarBound>) -> Self {
        let n = bounds.len();
        LinearProgram {
            bounds,
            objective: vec![0.0; n],
            maximize: false,
            rows: Vec::new(),
        }
    }

    pub fn minimize(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.bounds.len());
        self.objective = c;
        self.maximize = false;
    }

    pub fn maximize(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.bounds.len());
        self.objective = c;
        self.maximize = true;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.bounds.len());
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.bounds.len();
        // standard-form column index for each variable (+ and - parts)
        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        let mut ncols = 0usize;
        for b in &self.bounds {
            plus.push(ncols);
            ncols += 1;
            if *b == VarBound::Free {
                minus.push(Some(ncols));
                ncols += 1;
            } else {
                minus.push(None);
            }
        }
        let slack_start = ncols;
        let nslack = self.rows.iter().filter(|r| r.rel != Relation::Eq).count();
        let total = ncols + nslack;
        let m = self.rows.len();

        let scales: Vec<f64> = self
            .rows
            .iter()
            .map(|r| {
                let s = r.coeffs.iter().fold(0.0_f64, |a, &c| a.max(c.abs()));
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();

        let mut a = Matrix::zeros(m, total);
        let mut b = vec![0.0; m];
        let mut slack = slack_start;
        for (i, row) in self.rows.iter().enumerate() {
            let s = scales[i];
            for (j, &c) in row.coeffs.iter().enumerate() {
                a[(i, plus[j])] = c * s;
                if let Some(mj) = minus[j] {
                    a[(i, mj)] = -c * s;
                }
            }
            match row.rel {
                Relation::Le => {
                    a[(i, slack)] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    a[(i, slack)] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            b[i] = row.rhs * s;
        }
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let mut cost = vec![0.0; total];
        for j in 0..n {
            cost[plus[j]] = sign * self.objective[j];
            if let Some(mj) = minus[j] {
                cost[mj] = -sign * self.objective[j];
            }
        }

        let mut simplex = RevisedSimplex::new(&b);
        for j in 0..total {
            let col: Vec<f64> = a.column(j).iter().cloned().collect();
            simplex.add_column(&col, cost[j]);
        }
        simplex.solve()?;
        let z = simplex.primal();
        let x: Vec<f64> = (0..n)
            .map(|j| z[plus[j]] - minus[j].map_or(0.0, |mj| z[mj]))
            .collect();
        let objective: f64 = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        let duals: Vec<f64> = simplex
            .duals()
            .iter()
            .zip(&scales)
            .map(|(u, s)| u * s * sign)
            .collect();

        let mut residual = 0.0_f64;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(&x).map(|(a, b)| a * b).sum();
            let scale = 1.0 + row.rhs.abs() + row.coeffs.iter().fold(0.0_f64, |a, &c| a.max(c.abs()));
            let viol = match row.rel {
                Relation::Le => (lhs - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - row.rhs).abs(),
            } / scale;
            residual = residual.max(viol);
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if *b == VarBound::NonNegative {
                residual = residual.max((-x[j]).max(0.0));
            }
        }
        if residual > crate::tol::LP_RESIDUAL {
            return Err(Error::Certification {
                what: "LP feasibility".into(),
                residual,
                tolerance: crate::tol::LP_RESIDUAL,
            });
        }
        Ok(LpSolution {
            x,
            objective,
            duals,
            primal_residual: residual,
            pivots: simplex.pivots,
        })
    }
}
