//! Vertex/facet conversion for bounded polytopes with the origin in the
//! interior, by the double-description method on the homogenized cone
//! `{(x, t) : t - f.x >= 0, t >= 0}`.
//!
//! Facets are written as functionals `f` with the polytope `{x : f.x <= 1}`.
//! By polarity the same routine turns a vertex list into facet functionals.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

const RAY_LIMIT: usize = 250_000;

#[derive(Clone)]
struct Ray {
    z: Vector,
    zeros: Vec<u64>,
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1u64 << (i % 64);
}

fn and_count(a: &[u64], b: &[u64], out: &mut [u64]) -> usize {
    let mut c = 0;
    for k in 0..a.len() {
        out[k] = a[k] & b[k];
        c += out[k].count_ones() as usize;
    }
    c
}

fn superset(big: &[u64], small: &[u64]) -> bool {
    big.iter().zip(small).all(|(b, s)| b & s == *s)
}

/// Vertices of `{x in R^dim : f.x <= 1 for all f}`.
///
/// Errors when the region is unbounded (the functionals do not span) or the
/// intermediate ray count exceeds the enumeration limit.
pub fn vertices_from_facets(facets: &[Vector], dim: usize) -> Result<Vec<Vector>> {
    if dim == 0 {
        return Ok(vec![]);
    }
    let d1 = dim + 1;
    // homogenized rows: index 0 is t >= 0
    let mut rows: Vec<Vector> = Vec::with_capacity(facets.len() + 1);
    let mut t_row = Vector::zeros(d1);
    t_row[dim] = 1.0;
    rows.push(t_row);
    for f in facets {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        let scale = f.amax();
        if scale == 0.0 {
            continue;
        }
        let mut g = Vector::zeros(d1);
        for i in 0..dim {
            g[i] = -f[i];
        }
        g[dim] = 1.0;
        rows.push(g);
    }
    let nrows = rows.len();
    let words = nrows.div_ceil(64);

    // greedy independent initial set
    let mut init: Vec<usize> = Vec::with_capacity(d1);
    let mut q: Vec<Vector> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut v = r.clone();
        for b in &q {
            let c = v.dot(b);
            v.axpy(-c, b, 1.0);
        }
        let nv = v.norm();
        if nv > 1e-9 * r.norm().max(1.0) {
            q.push(v / nv);
            init.push(i);
            if init.len() == d1 {
                break;
            }
        }
    }
    if init.len() < d1 {
        return Err(Error::InvalidNorm(
            "facet functionals do not span: region is unbounded".into(),
        ));
    }
    let gi = Matrix::from_fn(d1, d1, |a, b| rows[init[a]][b]);
    let inv = gi
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::InvalidNorm("singular initial facet system".into()))?;
    let mut rays: Vec<Ray> = Vec::with_capacity(d1);
    for j in 0..d1 {
        let z = inv.column(j).into_owned();
        let mut zeros = vec![0u64; words];
        for (k, &row) in init.iter().enumerate() {
            if k != j {
                set_bit(&mut zeros, row);
            }
        }
        let s = z.amax();
        rays.push(Ray { z: z / s, zeros });
    }

    let mut processed: Vec<bool> = vec![false; nrows];
    for &i in &init {
        processed[i] = true;
    }
    let mut scratch = vec![0u64; words];
    for i in 0..nrows {
        if processed[i] {
            continue;
        }
        processed[i] = true;
        let g = &rows[i];
        let gn = g.norm();
        let vals: Vec<f64> = rays.iter().map(|r| g.dot(&r.z)).collect();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut zer = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            let tol = 1e-10 * gn * rays[k].z.norm();
            if v > tol {
                pos.push(k);
            } else if v < -tol {
                neg.push(k);
            } else {
                zer.push(k);
            }
        }
        if neg.is_empty() {
            for &k in &zer {
                set_bit(&mut rays[k].zeros, i);
            }
            continue;
        }
        let mut next: Vec<Ray> = Vec::with_capacity(pos.len() + zer.len() + pos.len() * 2);
        for &k in &pos {
            next.push(rays[k].clone());
        }
        for &k in &zer {
            let mut r = rays[k].clone();
            set_bit(&mut r.zeros, i);
            next.push(r);
        }
        for &p in &pos {
            for &n in &neg {
                let common = and_count(&rays[p].zeros, &rays[n].zeros, &mut scratch);
                if common + 1 < dim {
                    continue;
                }
                let blocked = rays.iter().enumerate().any(|(k, r)| {
                    k != p && k != n && superset(&r.zeros, &scratch)
                });
                if blocked {
                    continue;
                }
                let z = &rays[n].z * vals[p] - &rays[p].z * vals[n];
                let s = z.amax();
                if s == 0.0 {
                    continue;
                }
                let mut zeros = scratch.clone();
                set_bit(&mut zeros, i);
                next.push(Ray { z: z / s, zeros });
            }
        }
        if next.len() > RAY_LIMIT {
            return Err(Error::EnumerationTooLarge(format!(
                "double description exceeded {RAY_LIMIT} rays"
            )));
        }
        rays = next;
    }

    let mut out: Vec<Vector> = Vec::new();
    for r in rays {
        let t = r.z[dim];
        if t <= 1e-12 * r.z.amax() {
            return Err(Error::InvalidNorm(
                "facet region is unbounded".into(),
            ));
        }
        let x = r.z.rows(0, dim).into_owned() / t;
        if !out.iter().any(|v| (v - &x).amax() <= 1e-9 * (1.0 + x.amax())) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Facet functionals `f` (with `conv(V) = {x : f.x <= 1}`) of the convex hull
/// of a vertex list that has the origin in its interior.
pub fn facets_from_vertices(vertices: &[Vector], dim: usize) -> Result<Vec<Vector>> {
    vertices_from_facets(vertices, dim)
}
