//! Numeric tolerances and caps shared by every module.

use serde::{Deserialize, Serialize};

/// Linear-algebra residuals (idempotence, image, commutation laws).
pub const LINALG: f64 = 1e-9;
/// Rank decisions on bases.
pub const RANK: f64 = 1e-10;
/// Termination of iterative optimizers.
pub const OPTIMIZATION: f64 = 1e-6;
/// Feasibility / duality residual accepted from the simplex solver.
pub const LP_RESIDUAL: f64 = 1e-8;
/// Largest dimension for which `2^n` sign vectors are enumerated.
pub const DIMENSION_CAP: usize = 20;
/// Largest dimension for vertex/facet conversion of polytopes.
pub const CONVERSION_CAP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub linalg: f64,
    pub rank: f64,
    pub optimization: f64,
    pub dimension_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            linalg: LINALG,
            rank: RANK,
            optimization: OPTIMIZATION,
            dimension_cap: DIMENSION_CAP,
        }
    }
}
