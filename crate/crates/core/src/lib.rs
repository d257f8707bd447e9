//! Numerical tools for projection constants of finite-dimensional normed
//! spaces, chains of projections, finite-dimensional decompositions and
//! sufficient enlargements.

pub mod cli;
pub mod enlargements;
pub mod error;
pub mod fdd;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod minmax;
pub mod minproj;
pub mod polytope;
pub mod projections;
pub mod spaces;
pub mod subspace;
pub mod tol;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use spaces::{LinearMap, NormKind, NormedSpace};
pub use subspace::Subspace;
