//! Linear subspaces of a normed space, stored as a full-column-rank basis
//! in ambient coordinates. The norm restricted to the subspace is built on
//! first use and shared between clones.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::spaces::NormedSpace;
use crate::tol;

#[derive(Clone)]
pub struct Subspace {
    ambient: Arc<NormedSpace>,
    basis: Matrix,
    label: String,
    coords: Arc<OnceLock<Result<Arc<NormedSpace>>>>,
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subspace")
            .field("label", &self.label)
            .field("ambient", &self.ambient.label())
            .field("dim", &self.dim())
            .finish()
    }
}

impl Subspace {
    pub fn new(ambient: Arc<NormedSpace>, basis: Matrix, label: impl Into<String>) -> Result<Self> {
        if basis.nrows() != ambient.dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.dim(),
                got: basis.nrows(),
            });
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSubspace("non-finite basis entry".into()));
        }
        let r = linalg::rank(&basis, tol::RANK);
        if r < basis.ncols() {
            return Err(Error::RankCollapse {
                rank: r,
                expected: basis.ncols(),
            });
        }
        Ok(Subspace {
            ambient,
            basis,
            label: label.into(),
            coords: Arc::new(OnceLock::new()),
        })
    }

    pub fn from_vectors(ambient: Arc<NormedSpace>, vectors: &[Vector]) -> Result<Self> {
        let n = ambient.dim();
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Self::new(ambient, linalg::matrix_from_columns(vectors, n), "")
    }

    /// Span of an arbitrary (possibly dependent) generating set.
    pub fn span(ambient: Arc<NormedSpace>, generators: &Matrix) -> Result<Self> {
        let q = linalg::orthonormal_basis(generators, tol::RANK);
        Self::new(ambient, q, "")
    }

    pub fn full(ambient: Arc<NormedSpace>) -> Self {
        let n = ambient.dim();
        let s = Subspace {
            basis: Matrix::identity(n, n),
            label: ambient.label().to_string(),
            coords: Arc::new(OnceLock::new()),
            ambient: ambient.clone(),
        };
        let _ = s.coords.set(Ok(ambient));
        s
    }

    pub fn zero(ambient: Arc<NormedSpace>) -> Self {
        let n = ambient.dim();
        Subspace {
            ambient,
            basis: Matrix::zeros(n, 0),
            label: "0".into(),
            coords: Arc::new(OnceLock::new()),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn ambient(&self) -> &Arc<NormedSpace> {
        &self.ambient
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn orthonormal_basis(&self) -> Matrix {
        linalg::orthonormal_basis(&self.basis, tol::RANK)
    }

    /// Orthonormal basis of the Euclidean orthogonal complement.
    pub fn complement_basis(&self) -> Matrix {
        linalg::orthogonal_complement(&self.basis, tol::RANK)
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim()
    }

    /// The subspace norm in basis coordinates, `c -> ||B c||`.
    pub fn coordinate_space(&self) -> Result<Arc<NormedSpace>> {
        self.coords
            .get_or_init(|| {
                NormedSpace::induced(&self.ambient, self.basis.clone()).map(Arc::new)
            })
            .clone()
    }

    /// Coordinates used when optimizing over maps defined on this subspace:
    /// `(E, N)` with `x = E c` and `||x|| = N(c)`. Full-dimensional
    /// subspaces use ambient coordinates.
    pub fn frame(&self) -> Result<(Matrix, Arc<NormedSpace>)> {
        if self.is_full() {
            let n = self.ambient_dim();
            return Ok((Matrix::identity(n, n), self.ambient.clone()));
        }
        Ok((self.basis.clone(), self.coordinate_space()?))
    }

    /// Relative distance of the span of `other` to this subspace; zero when
    /// `other` is contained in `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        if other.dim() == 0 {
            return 0.0;
        }
        linalg::span_residual(&self.basis, &other.basis)
    }

    pub fn contains(&self, other: &Subspace) -> bool {
        self.containment_residual(other) <= tol::LINALG
    }

    pub fn contains_vector(&self, v: &Vector) -> bool {
        linalg::span_residual(&self.basis, &Matrix::from_column_slice(v.len(), 1, v.as_slice()))
            <= tol::LINALG
    }

    pub fn same_as(&self, other: &Subspace) -> bool {
        self.dim() == other.dim() && self.contains(other)
    }

    /// `self + other`; errors unless the sum is direct.
    pub fn direct_sum(&self, other: &Subspace) -> Result<Subspace> {
        let b = linalg::hstack(&[&self.basis, &other.basis]);
        let r = linalg::rank(&b, tol::RANK);
        if r < b.ncols() {
            return Err(Error::NotDirectSum(format!(
                "{} + {} has rank {r}, expected {}",
                self.label,
                other.label,
                b.ncols()
            )));
        }
        Subspace::new(self.ambient.clone(), b, format!("{}+{}", self.label, other.label))
    }

    pub fn intersection(&self, other: &Subspace) -> Result<Subspace> {
        let q = linalg::intersection(&self.basis, &other.basis, tol::RANK);
        Subspace::new(self.ambient.clone(), q, "")
    }

    /// Same subspace, same ambient norm, orthonormal basis.
    pub fn orthonormalized(&self) -> Subspace {
        Subspace {
            ambient: self.ambient.clone(),
            basis: self.orthonormal_basis(),
            label: self.label.clone(),
            coords: Arc::new(OnceLock::new()),
        }
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        self.ambient.norm(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_checks() {
        let s = Arc::new(NormedSpace::linf(3));
        let dep = Matrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        assert!(matches!(
            Subspace::new(s.clone(), dep.clone(), "d"),
            Err(Error::RankCollapse { rank: 1, expected: 2 })
        ));
        assert_eq!(Subspace::span(s.clone(), &dep).unwrap().dim(), 1);
        let z = Subspace::zero(s.clone());
        assert_eq!(z.dim(), 0);
        assert_eq!(z.coordinate_space().unwrap().dim(), 0);
    }

    #[test]
    fn containment_and_sums() {
        let s = Arc::new(NormedSpace::l2(3));
        let a = Subspace::from_vectors(s.clone(), &[Vector::from_column_slice(&[1.0, 0.0, 0.0])]).unwrap();
        let b = Subspace::from_vectors(s.clone(), &[Vector::from_column_slice(&[0.0, 1.0, 0.0])]).unwrap();
        let ab = a.direct_sum(&b).unwrap();
        assert!(ab.contains(&a) && ab.contains(&b) && !a.contains(&b));
        assert!(ab.direct_sum(&a).is_err());
        assert_eq!(ab.intersection(&a).unwrap().dim(), 1);
    }
}
