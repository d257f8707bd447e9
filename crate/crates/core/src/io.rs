//! JSON documents for spaces, subspaces, chains and maps.
//!
//! Vectors are flat arrays. Maps are flat row-major arrays of an
//! `ambient x ambient` matrix. `p` may be a number or the string `"inf"`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fdd::Decomposition;
use crate::linalg::{Matrix, Vector};
use crate::projections::{Chain, Projection};
use crate::spaces::{NormKind, NormOptions, NormedSpace};
use crate::subspace::Subspace;

fn de_p<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum P {
        Num(f64),
        Text(String),
    }
    match P::deserialize(d)? {
        P::Num(p) => Ok(p),
        P::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
        P::Text(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

fn ser_p<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Lp {
        #[serde(deserialize_with = "de_p", serialize_with = "ser_p")]
        p: f64,
    },
    Vertices { vertices: Vec<Vec<f64>> },
    Facets { facets: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub dim: usize,
    pub norm: NormSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn vectors(list: &[Vec<f64>], dim: usize) -> Result<Vec<Vector>> {
    list.iter()
        .map(|v| {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            Ok(Vector::from_column_slice(v))
        })
        .collect()
}

impl SpaceSpec {
    pub fn lp(dim: usize, p: f64) -> Self {
        SpaceSpec {
            dim,
            norm: NormSpec::Lp { p },
            label: None,
        }
    }

    pub fn build(&self) -> Result<NormedSpace> {
        if self.dim == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        let s = match &self.norm {
            NormSpec::Lp { p } => NormedSpace::lp(self.dim, *p)?,
            NormSpec::Vertices { vertices } => NormedSpace::from_vertices(vectors(vertices, self.dim)?)?,
            NormSpec::Facets { facets } => NormedSpace::from_facets(vectors(facets, self.dim)?)?,
        };
        Ok(match &self.label {
            Some(l) => s.with_label(l.clone()),
            None => s,
        })
    }

    pub fn of(space: &NormedSpace) -> Result<Self> {
        let norm = match space.kind() {
            NormKind::Lp(p) => NormSpec::Lp { p: *p },
            NormKind::Vertices(v) => NormSpec::Vertices {
                vertices: v.iter().map(|x| x.as_slice().to_vec()).collect(),
            },
            NormKind::Facets(f) => NormSpec::Facets {
                facets: f.iter().map(|x| x.as_slice().to_vec()).collect(),
            },
            NormKind::Induced { .. } => return Err(Error::Parse("induced norms have no document form".into())),
        };
        Ok(SpaceSpec {
            dim: space.dim(),
            norm,
            label: Some(space.label().to_string()).filter(|l| !l.is_empty()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub basis: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SubspaceSpec {
    pub fn build(&self, ambient: &Arc<NormedSpace>) -> Result<Subspace> {
        let v = vectors(&self.basis, ambient.dim())?;
        let s = Subspace::from_vectors(ambient.clone(), &v)?;
        Ok(match &self.label {
            Some(l) => s.with_label(l.clone()),
            None => s,
        })
    }

    pub fn of(s: &Subspace) -> Self {
        SubspaceSpec {
            basis: s.basis().column_iter().map(|c| c.iter().copied().collect()).collect(),
            label: Some(s.label().to_string()).filter(|l| !l.is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub space: SpaceSpec,
    /// Basis of each `X_n`.
    pub subspaces: Vec<Vec<Vec<f64>>>,
    /// Optional step matrices `P_n: X_(n+1) -> X_n`, flat row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<Vec<f64>>>,
}

impl ChainSpec {
    pub fn build(&self) -> Result<Chain> {
        let amb = Arc::new(self.space.build()?);
        let subs = self
            .subspaces
            .iter()
            .enumerate()
            .map(|(i, b)| {
                SubspaceSpec {
                    basis: b.clone(),
                    label: Some(format!("X{}", i + 1)),
                }
                .build(&amb)
            })
            .collect::<Result<Vec<_>>>()?;
        let chain = Chain::new(subs)?;
        match &self.steps {
            None => Ok(chain),
            Some(steps) => {
                let n = amb.dim();
                let subs = chain.subspaces().to_vec();
                let ps = steps
                    .iter()
                    .enumerate()
                    .map(|(i, flat)| {
                        let m = matrix_from_flat(flat, n, n)?;
                        let (dom, img) = match (subs.get(i + 1), subs.get(i)) {
                            (Some(d), Some(t)) => (d.clone(), t.clone()),
                            _ => {
                                return Err(Error::DimensionMismatch {
                                    expected: subs.len() - 1,
                                    got: steps.len(),
                                })
                            }
                        };
                        Projection::new(dom, img, m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                chain.with_steps(ps)
            }
        }
    }
}

/// Either explicit block bases or coordinate block sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSpec {
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
}

impl DecompositionSpec {
    pub fn build(&self, opts: &NormOptions) -> Result<Decomposition> {
        let amb = Arc::new(self.space.build()?);
        match (&self.blocks, &self.sizes) {
            (Some(blocks), None) => {
                let bs = blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        SubspaceSpec {
                            basis: b.clone(),
                            label: Some(format!("W{}", i + 1)),
                        }
                        .build(&amb)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Decomposition::new(amb, bs, opts)
            }
            (None, Some(sizes)) => Decomposition::coordinate(amb, sizes, opts),
            _ => Err(Error::Parse("a decomposition needs exactly one of `blocks` and `sizes`".into())),
        }
    }
}

pub fn matrix_from_flat(flat: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if flat.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: flat.len(),
        });
    }
    Ok(Matrix::from_row_slice(rows, cols, flat))
}

pub fn matrix_to_flat(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_documents() {
        let s: SpaceSpec = serde_json::from_str(r#"{"dim": 2, "norm": {"kind": "lp", "p": "inf"}}"#).unwrap();
        let sp = s.build().unwrap();
        assert_eq!(sp.norm(&Vector::from_column_slice(&[1.0, -1.0])).unwrap(), 1.0);
        let back = serde_json::to_string(&SpaceSpec::of(&sp).unwrap()).unwrap();
        assert!(back.contains("\"inf\""));
        let hex = r#"{"dim": 2, "norm": {"kind": "vertices", "vertices": [[1,0],[-1,0],[0,1],[0,-1],[1,1],[-1,-1]]}}"#;
        let h: SpaceSpec = serde_json::from_str(hex).unwrap();
        let n = h.build().unwrap().norm(&Vector::from_column_slice(&[1.0, 1.0])).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"dim": 2, "norm": {"kind": "lq"}}"#).is_err());
    }

    #[test]
    fn flat_maps_are_row_major() {
        let m = matrix_from_flat(&[1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(matrix_to_flat(&m), vec![1.0, 2.0, 3.0, 4.0]);
    }
}
