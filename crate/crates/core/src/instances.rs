//! Seeded instance families shared by the driver, the tests and the C API.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fdd::{Decomposition, InterlacedSystem, OuterChoice};
use crate::linalg::{self, Matrix, Vector};
use crate::minproj::{embed_into_linf, minimal_projection, EmbedScheme, MinProjOptions};
use crate::projections::{make_projection, orthogonal_projection, Chain, Projection};
use crate::spaces::{gaussian, NormOptions, NormedSpace};
use crate::subspace::Subspace;
use crate::tol;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| gaussian(rng))
}

/// `b_n = e_n` and `b_j = e_j + γ (b_(j+1) + ... + b_n)`.
pub fn gamma_basis(n: usize, gamma: f64) -> Matrix {
    let mut b = Matrix::identity(n, n);
    for j in (0..n.saturating_sub(1)).rev() {
        let tail: Vector = (j + 1..n).map(|i| b.column(i).into_owned()).fold(Vector::zeros(n), |a, c| a + c);
        let col = b.column(j) + tail * gamma;
        b.set_column(j, &col);
    }
    b
}

/// `X_L = span(b_1, ..., b_L)` in `l_inf^n` with Euclidean-orthogonal steps.
pub fn gamma_chain(n: usize, gamma: f64, len: usize) -> Result<Chain> {
    let s = Arc::new(NormedSpace::linf(n));
    let b = gamma_basis(n, gamma);
    let subs = (1..=len.min(n))
        .map(|l| Subspace::new(s.clone(), b.columns(0, l).into_owned(), format!("X{l}")))
        .collect::<Result<Vec<_>>>()?;
    Chain::new(subs)?.with_orthogonal_steps()
}

/// `span(e_1, ..., e_L)` in `l_inf^n` with coordinate steps.
pub fn coordinate_chain(n: usize, len: usize) -> Result<Chain> {
    let s = Arc::new(NormedSpace::linf(n));
    let subs = (1..=len.min(n))
        .map(|l| Subspace::new(s.clone(), Matrix::identity(n, n).columns(0, l).into_owned(), format!("X{l}")))
        .collect::<Result<Vec<_>>>()?;
    Chain::new(subs)?.with_orthogonal_steps()
}

/// `X_j = span(e_1, ..., e_j, v_j)` with the tails `v_j = Σ_(i>j) s^(i-j) e_i`;
/// nested because `v_j = s e_(j+1) + s v_(j+1)`. The last element is the
/// whole `l_inf^n`.
pub fn tail_chain(n: usize, s: f64) -> Result<Vec<Subspace>> {
    let space = Arc::new(NormedSpace::linf(n));
    let mut out = Vec::with_capacity(n - 1);
    for j in 1..n {
        let mut b = Matrix::zeros(n, j + 1);
        for i in 0..j {
            b[(i, i)] = 1.0;
        }
        for i in j..n {
            b[(i, j)] = s.powi((i + 1 - j) as i32);
        }
        out.push(Subspace::new(space.clone(), b, format!("X{j}"))?);
    }
    Ok(out)
}

/// Random composition of `n` into `parts` positive sizes.
fn random_sizes(rng: &mut ChaCha8Rng, n: usize, parts: usize) -> Vec<usize> {
    let mut sizes = vec![1; parts];
    for _ in parts..n {
        let i = rng.random_range(0..parts);
        sizes[i] += 1;
    }
    sizes
}

/// Blocks `e + skew * G` grouped by `sizes`; bases are re-drawn until the
/// stack is well conditioned.
pub fn random_decomposition(
    rng: &mut ChaCha8Rng,
    space: Arc<NormedSpace>,
    sizes: &[usize],
    skew: f64,
    opts: &NormOptions,
) -> Result<Decomposition> {
    let n = space.dim();
    for _ in 0..32 {
        let m = Matrix::identity(n, n) + gaussian_matrix(rng, n, n) * skew;
        let sv = m.clone().svd(false, false).singular_values;
        if sv.min() < 0.2 {
            continue;
        }
        let mut at = 0;
        let mut blocks = Vec::with_capacity(sizes.len());
        for (i, &s) in sizes.iter().enumerate() {
            blocks.push(Subspace::new(space.clone(), m.columns(at, s).into_owned(), format!("W{}", i + 1))?);
            at += s;
        }
        return Decomposition::new(space, blocks, opts);
    }
    Err(Error::Precondition("could not draw a well-conditioned decomposition".into()))
}

/// A seeded interlaced system in `l_inf^n` (`4 <= n <= max_dim`) or `l_1^n`
/// (`n <= 6`, where subspace norms stay cheap):
/// random blocks, `X_i = Z_i + span(part of W_(i+1))` and outer projections
/// of the given kind.
pub fn random_interlaced(seed: u64, max_dim: usize, outer: OuterChoice, opts: &NormOptions) -> Result<InterlacedSystem> {
    let mut r = rng(seed);
    let n = r.random_range(4..=max_dim.max(4));
    let space = Arc::new(if n > 6 || r.random_bool(0.5) {
        NormedSpace::linf(n)
    } else {
        NormedSpace::l1(n)
    });
    let parts = r.random_range(3..=n.min(6));
    let sizes = random_sizes(&mut r, n, parts);
    let d = random_decomposition(&mut r, space.clone(), &sizes, 0.3, opts)?;
    let mut chain = Vec::with_capacity(parts);
    for i in 1..=parts {
        let z = d.partial_sum(i);
        if i == parts {
            chain.push(z);
            break;
        }
        let w = &d.blocks()[i];
        let take = r.random_range(0..=w.dim());
        let extra = w.basis() * gaussian_matrix(&mut r, w.dim(), take);
        let x = Subspace::new(space.clone(), linalg::hstack(&[z.basis(), &extra]), format!("X{i}"))?;
        chain.push(x);
    }
    let full = Subspace::full(space);
    let q = chain
        .iter()
        .map(|x| match outer {
            OuterChoice::Orthogonal => orthogonal_projection(&full, x),
            OuterChoice::Minimal => Ok(minimal_projection(&full, x, None, &MinProjOptions::default())?.projection),
        })
        .collect::<Result<Vec<_>>>()?;
    InterlacedSystem::new(d, chain, q, opts)
}

/// Coordinate interlaced system: `X_i = Z_i` in `l_inf^n`, coordinate `Q_i`.
pub fn coordinate_interlaced(n: usize, opts: &NormOptions) -> Result<InterlacedSystem> {
    let space = Arc::new(NormedSpace::linf(n));
    let d = Decomposition::coordinate(space.clone(), &vec![1; n], opts)?;
    let chain: Vec<Subspace> = (1..=n).map(|i| d.partial_sum(i)).collect();
    let full = Subspace::full(space);
    let q = chain
        .iter()
        .map(|x| orthogonal_projection(&full, x))
        .collect::<Result<Vec<_>>>()?;
    InterlacedSystem::new(d, chain, q, opts)
}

/// The six coordinate blocks of `l_inf^6` with `H = W_1 + span(e_2 + 0.01 e_5)`,
/// `k = 1`, `eps = 0.1`.
pub fn golden_blocking(opts: &NormOptions) -> Result<(Decomposition, Subspace, usize, f64)> {
    let s = Arc::new(NormedSpace::linf(6));
    let d = Decomposition::coordinate(s.clone(), &[1; 6], opts)?;
    let mut h = Matrix::zeros(6, 2);
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(4, 1)] = 0.01;
    let h = Subspace::new(s, h, "H")?;
    Ok((d, h, 1, 0.1))
}

/// Random decomposition of `l_inf^n` (`n <= 8`), `k` leading blocks inside
/// `H` plus a few vectors leaking slightly into later blocks.
pub fn random_blocking(seed: u64, opts: &NormOptions) -> Result<(Decomposition, Subspace, usize, f64)> {
    let mut r = rng(seed);
    let n = r.random_range(4..=8);
    let space = Arc::new(NormedSpace::linf(n));
    let parts = r.random_range(3..=n);
    let sizes = random_sizes(&mut r, n, parts);
    let d = random_decomposition(&mut r, space.clone(), &sizes, 0.2, opts)?;
    let k = r.random_range(1..parts);
    let head: Vec<&Matrix> = d.blocks()[..k].iter().map(|b| b.basis()).collect();
    let mut cols = vec![linalg::hstack(&head)];
    let next = &d.blocks()[k];
    let leak = r.random_range(1e-4..0.05);
    for _ in 0..r.random_range(1..=next.dim()) {
        let mut v = next.basis() * gaussian_matrix(&mut r, next.dim(), 1);
        for w in &d.blocks()[k + 1..] {
            v += w.basis() * gaussian_matrix(&mut r, w.dim(), 1) * leak;
        }
        cols.push(v);
    }
    let refs: Vec<&Matrix> = cols.iter().collect();
    let h = Subspace::span(space, &linalg::hstack(&refs))?.with_label("H");
    let eps = r.random_range(0.02..0.3);
    Ok((d, h, k, eps))
}

/// `X1 ⊂ X2 ⊂ X3` in `l_inf^n` with `dim X3 <= max_dim`, plus a projection of
/// `X3` onto `X1` along a random complement.
pub fn random_triple(seed: u64, n: usize, max_dim: usize) -> Result<(Subspace, Subspace, Subspace, Projection)> {
    let mut r = rng(seed);
    let space = Arc::new(NormedSpace::linf(n));
    let d3 = r.random_range(2..=max_dim.min(n));
    let d2 = r.random_range(1..=d3);
    let d1 = r.random_range(1..=d2);
    let b = gaussian_matrix(&mut r, n, d3);
    let x3 = Subspace::new(space.clone(), b.clone(), "X3")?;
    let x2 = Subspace::new(space.clone(), b.columns(0, d2).into_owned(), "X2")?;
    let x1 = Subspace::new(space.clone(), b.columns(0, d1).into_owned(), "X1")?;
    // kernel: random complement of X1 inside X3
    let mix = b.columns(d1, d3 - d1) + b.columns(0, d1) * gaussian_matrix(&mut r, d1, d3 - d1) * 0.5;
    let kernel = Subspace::new(space, mix, "K")?;
    let p = make_projection(&x3, &x1, &kernel)?;
    Ok((x1, x2, x3, p))
}

/// `X = span(e_1..e_kx)`, `Y = span(e_(kx+1)..e_n)` in `l_inf^n`.
pub fn coordinate_pair(n: usize, kx: usize) -> Result<(Subspace, Subspace, Subspace)> {
    let s = Arc::new(NormedSpace::linf(n));
    let eye = Matrix::identity(n, n);
    let x = Subspace::new(s.clone(), eye.columns(0, kx).into_owned(), "X")?;
    let y = Subspace::new(s.clone(), eye.columns(kx, n - kx).into_owned(), "Y")?;
    Ok((Subspace::full(s), x, y))
}

/// Two copies of the resolution-`m` embedding of `l2^2`, on disjoint
/// coordinates of `l_inf^(2m')`, so `||(x, y)|| = max(||x||, ||y||)`.
pub fn embedded_euclidean_pair(m: usize) -> Result<(Subspace, Subspace, Subspace)> {
    let e = embed_into_linf(&NormedSpace::l2(2), m, EmbedScheme::Grid)?;
    let f = e.copy.basis();
    let k = f.nrows();
    let s = Arc::new(NormedSpace::linf(2 * k));
    let mut bx = Matrix::zeros(2 * k, 2);
    let mut by = Matrix::zeros(2 * k, 2);
    bx.view_mut((0, 0), (k, 2)).copy_from(f);
    by.view_mut((k, 0), (k, 2)).copy_from(f);
    let x = Subspace::new(s.clone(), bx, "X")?;
    let y = Subspace::new(s.clone(), by, "Y")?;
    Ok((Subspace::full(s), x, y))
}

/// `dims = (d1, d2, d3)` triples inside `l_inf^n` for the composition search;
/// `X3` is the whole space when `d3 == n`.
pub fn search_triple(seed: u64, n: usize, dims: (usize, usize, usize)) -> Result<(Subspace, Subspace, Subspace)> {
    let (d1, d2, d3) = dims;
    if !(1 <= d1 && d1 <= d2 && d2 <= d3 && d3 <= n) {
        return Err(Error::Precondition(format!("need 1 <= d1 <= d2 <= d3 <= {n}, got {dims:?}")));
    }
    let mut r = rng(seed);
    let space = Arc::new(NormedSpace::linf(n));
    let b = if d3 == n {
        // keep X3 = the ambient with a random flag inside it
        let g = gaussian_matrix(&mut r, n, n);
        if linalg::rank(&g, tol::RANK) < n {
            return Err(Error::RankCollapse { rank: linalg::rank(&g, tol::RANK), expected: n });
        }
        g
    } else {
        gaussian_matrix(&mut r, n, d3)
    };
    let x3 = if d3 == n {
        Subspace::full(space.clone())
    } else {
        Subspace::new(space.clone(), b.clone(), "X3")?
    };
    let x2 = Subspace::new(space.clone(), b.columns(0, d2).into_owned(), "X2")?;
    let x1 = Subspace::new(space, b.columns(0, d1).into_owned(), "X1")?;
    Ok((x1, x2, x3))
}

/// Coordinate triple `span(e_1..e_d1) ⊂ span(e_1..e_d2) ⊂ l_inf^n`.
pub fn coordinate_triple(n: usize, d1: usize, d2: usize) -> Result<(Subspace, Subspace, Subspace)> {
    let s = Arc::new(NormedSpace::linf(n));
    let eye = Matrix::identity(n, n);
    let x1 = Subspace::new(s.clone(), eye.columns(0, d1).into_owned(), "X1")?;
    let x2 = Subspace::new(s.clone(), eye.columns(0, d2).into_owned(), "X2")?;
    Ok((x1, x2, Subspace::full(s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_basis_is_unit_lower_triangular() {
        let b = gamma_basis(4, 0.5);
        assert_eq!(b[(3, 3)], 1.0);
        assert_eq!(b[(0, 3)], 0.0);
        // b_3 = e_3 + 0.5 e_4, b_2 = e_2 + 0.5 (b_3 + b_4)
        assert!((b[(3, 2)] - 0.5).abs() < 1e-15);
        assert!((b[(3, 1)] - 0.75).abs() < 1e-15);
        assert!((b[(2, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn seeded_families_are_reproducible() {
        let o = NormOptions::default();
        let a = random_interlaced(7, 8, OuterChoice::Orthogonal, &o).unwrap();
        let b = random_interlaced(7, 8, OuterChoice::Orthogonal, &o).unwrap();
        assert_eq!(a.chain.len(), b.chain.len());
        assert_eq!(a.outer[0].matrix(), b.outer[0].matrix());
        let (_, h1, k1, e1) = random_blocking(3, &o).unwrap();
        let (_, h2, k2, e2) = random_blocking(3, &o).unwrap();
        assert_eq!((k1, e1), (k2, e2));
        assert_eq!(h1.basis(), h2.basis());
    }
}
