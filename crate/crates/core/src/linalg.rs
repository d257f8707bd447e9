//! Dense helpers on top of nalgebra: ranks, orthonormal bases, complements,
//! intersections and span residuals. Everything is Euclidean here; norms
//! live in [`crate::spaces`].

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

fn singular_cutoff(s: &Vector, tol: f64) -> f64 {
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    tol * smax.max(1.0)
}

/// Numerical rank with a relative cutoff.
pub fn rank(m: &Matrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().singular_values();
    let cut = singular_cutoff(&s, tol);
    s.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis (as columns) of the column span of `m`.
///
/// The rank comes from the singular values; the basis itself from a
/// column-pivoted QR, whose leading columns span the range reliably even
/// when the SVD's left vectors for a rank-deficient input do not.
pub fn orthonormal_basis(m: &Matrix, tol: f64) -> Matrix {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return Matrix::zeros(n, 0);
    }
    let r = rank(m, tol);
    if r == 0 {
        return Matrix::zeros(n, 0);
    }
    let q = m.clone().col_piv_qr().q();
    let mut out = q.columns(0, r).into_owned();
    let resid = m - &out * (out.transpose() * m);
    if max_abs(&resid) > 1e-10 * max_abs(m).max(1.0) {
        // fall back to the left singular vectors of the largest values
        let mut svd = m.clone().svd(true, false);
        svd.sort_by_singular_values();
        out = svd.u.expect("left singular vectors").columns(0, r).into_owned();
    }
    out
}

/// Orthonormal basis of `{x : m x = 0}`, as the complement of the row space.
pub fn null_space(m: &Matrix, tol: f64) -> Matrix {
    let c = m.ncols();
    if c == 0 {
        return Matrix::zeros(0, 0);
    }
    let rows = orthonormal_basis(&m.transpose(), tol);
    if rows.ncols() == 0 {
        return Matrix::identity(c, c);
    }
    if rows.ncols() == c {
        return Matrix::zeros(c, 0);
    }
    let comp = Matrix::identity(c, c) - &rows * rows.transpose();
    orthonormal_basis(&comp, 1e-8)
}

/// Orthonormal basis of the Euclidean orthogonal complement of span(`m`)
/// inside the whole space.
pub fn orthogonal_complement(m: &Matrix, tol: f64) -> Matrix {
    null_space(&m.transpose(), tol)
}

/// Orthonormal basis of the Euclidean complement of span(`inner`) inside
/// span(`outer`).
pub fn relative_complement(inner: &Matrix, outer: &Matrix, tol: f64) -> Matrix {
    let qo = orthonormal_basis(outer, tol);
    if qo.ncols() == 0 {
        return Matrix::zeros(outer.nrows(), 0);
    }
    // coordinates of inner in the outer orthonormal frame
    let ci = qo.transpose() * inner;
    let comp = orthogonal_complement(&ci, tol);
    &qo * comp
}

/// Orthonormal basis of span(a) ∩ span(b).
pub fn intersection(a: &Matrix, b: &Matrix, tol: f64) -> Matrix {
    let n = a.nrows();
    let qa = orthonormal_basis(a, tol);
    let qb = orthonormal_basis(b, tol);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return Matrix::zeros(n, 0);
    }
    let mut stacked = Matrix::zeros(n, qa.ncols() + qb.ncols());
    stacked.view_mut((0, 0), (n, qa.ncols())).copy_from(&qa);
    stacked
        .view_mut((0, qa.ncols()), (n, qb.ncols()))
        .copy_from(&(-&qb));
    let ns = null_space(&stacked, tol.max(1e-9));
    if ns.ncols() == 0 {
        return Matrix::zeros(n, 0);
    }
    let top = ns.rows(0, qa.ncols()).into_owned();
    orthonormal_basis(&(&qa * top), tol)
}

/// Horizontal concatenation.
pub fn hstack(blocks: &[&Matrix]) -> Matrix {
    let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(n, total);
    let mut off = 0;
    for b in blocks {
        assert_eq!(b.nrows(), n, "hstack row mismatch");
        out.view_mut((0, off), (n, b.ncols())).copy_from(*b);
        off += b.ncols();
    }
    out
}

/// Largest Euclidean distance of a column of `vectors` to span(`basis`),
/// relative to max(1, |v|).
pub fn span_residual(basis: &Matrix, vectors: &Matrix) -> f64 {
    if vectors.ncols() == 0 {
        return 0.0;
    }
    let q = orthonormal_basis(basis, 1e-12);
    let mut worst = 0.0_f64;
    for j in 0..vectors.ncols() {
        let v = vectors.column(j).into_owned();
        let r = if q.ncols() == 0 {
            v.norm()
        } else {
            (&v - &q * (q.transpose() * &v)).norm()
        };
        worst = worst.max(r / v.norm().max(1.0));
    }
    worst
}

/// Least-squares coefficients of `x` in terms of the columns of `basis`.
pub fn coordinates(basis: &Matrix, x: &Vector) -> Vector {
    if basis.ncols() == 0 {
        return Vector::zeros(0);
    }
    pinv(basis) * x
}

/// Moore–Penrose pseudo-inverse, through `m = Q R` with `Q` an orthonormal
/// basis of the range and `R` of full row rank.
pub fn pinv(m: &Matrix) -> Matrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let q = orthonormal_basis(m, 1e-13);
    if q.ncols() == 0 {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let r = q.transpose() * m;
    match (&r * r.transpose()).cholesky() {
        Some(ch) => r.transpose() * ch.inverse() * q.transpose(),
        None => m
            .clone()
            .pseudo_inverse(1e-13)
            .expect("pseudo-inverse with nonnegative epsilon"),
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Orthogonal projector onto span(`basis`).
pub fn orthogonal_projector(basis: &Matrix) -> Matrix {
    let q = orthonormal_basis(basis, 1e-12);
    &q * q.transpose()
}

pub fn is_identity_basis(m: &Matrix) -> bool {
    m.is_square() && (m - Matrix::identity(m.nrows(), m.ncols())).amax() == 0.0
}

pub fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize) -> Matrix {
    Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Columns given as a list of vectors.
pub fn matrix_from_columns(cols: &[Vector], nrows: usize) -> Matrix {
    let mut m = Matrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_and_intersection() {
        let a = Matrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let c = orthogonal_complement(&a, 1e-10);
        assert_eq!(c.ncols(), 1);
        assert!((c[(2, 0)].abs() - 1.0).abs() < 1e-12);

        let b = Matrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let i = intersection(&a, &b, 1e-10);
        assert_eq!(i.ncols(), 1);
        assert!((i[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_and_null_space() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&m, 1e-10), 1);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_square_inputs() {
        // rank 2 in R^4; left singular vectors of such inputs have been unreliable
        let a = Matrix::from_row_slice(
            4,
            2,
            &[0.15, 0.03, 0.03, -0.79, 0.02, 0.60, 1.10, 0.12],
        );
        let m = &a * Matrix::from_row_slice(2, 4, &[1.0, -0.5, 2.0, 0.3, 0.0, 1.0, -1.0, 0.7]);
        let q = orthonormal_basis(&m, 1e-10);
        assert_eq!(q.ncols(), 2);
        assert!((&m - &q * (q.transpose() * &m)).amax() < 1e-12);
        assert!((q.transpose() * &q - Matrix::identity(2, 2)).amax() < 1e-12);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).amax() < 1e-12);
        let p = pinv(&m);
        assert!((&m * &p * &m - &m).amax() < 1e-12);
        assert!((&p * &m * &p - &p).amax() < 1e-10);
    }

    #[test]
    fn relative_complement_inside_plane() {
        let outer = Matrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let inner = Matrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let c = relative_complement(&inner, &outer, 1e-10);
        assert_eq!(c.ncols(), 1);
        assert!((c.column(0).dot(&inner.column(0))).abs() < 1e-12);
        assert!(c[(2, 0)].abs() < 1e-12);
    }
}
