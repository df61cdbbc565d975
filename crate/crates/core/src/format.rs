//! JSON instance files, schema version 1.
//!
//! ```json
//! {"v": 1, "dim": 2, "rho1": [[[1,0],[0,0]],[[0,0],[0,0]]], "rho2": ..., "eta1": 0.5}
//! {"v": 1, "similar": {"d": 2, "r_mat": ..., "thetas": [0.3, 0.7], "eta1": 0.5}}
//! ```
//!
//! Complex matrices are nested row arrays of `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::similar::{self, SimilarClassSpec, SpecError};
use crate::states::{make_instance, validate_density, DiscriminationInstance, StateError};

pub const SCHEMA_VERSION: u32 = 1;

pub type ComplexRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}, expected 1")]
    Version(u32),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub v: u32,
    #[serde(flatten)]
    pub body: InstanceBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceBody {
    Similar {
        similar: SimilarSection,
    },
    Explicit {
        dim: usize,
        rho1: ComplexRows,
        rho2: ComplexRows,
        eta1: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarSection {
    pub d: usize,
    pub r_mat: ComplexRows,
    pub thetas: Vec<f64>,
    pub eta1: f64,
}

/// A parsed file turned into problem objects.
#[derive(Debug, Clone)]
pub enum Resolved {
    Explicit(DiscriminationInstance),
    Similar {
        spec: SimilarClassSpec,
        instance: DiscriminationInstance,
        unitary: CMatrix,
    },
}

impl Resolved {
    pub fn instance(&self) -> &DiscriminationInstance {
        match self {
            Resolved::Explicit(inst) => inst,
            Resolved::Similar { instance, .. } => instance,
        }
    }
}

pub fn matrix_to_rows(m: &CMatrix) -> ComplexRows {
    m.to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &ComplexRows) -> Result<CMatrix, FormatError> {
    let nested: Vec<Vec<C64>> = rows
        .iter()
        .map(|row| row.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    CMatrix::from_rows(&nested).ok_or_else(|| FormatError::Shape("ragged matrix rows".into()))
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.v != SCHEMA_VERSION {
            return Err(FormatError::Version(file.v));
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialise")
    }

    pub fn explicit(rho1: &CMatrix, rho2: &CMatrix, eta1: f64) -> Self {
        Self {
            v: SCHEMA_VERSION,
            body: InstanceBody::Explicit {
                dim: rho1.rows(),
                rho1: matrix_to_rows(rho1),
                rho2: matrix_to_rows(rho2),
                eta1,
            },
        }
    }

    pub fn similar(spec: &SimilarClassSpec) -> Self {
        Self {
            v: SCHEMA_VERSION,
            body: InstanceBody::Similar {
                similar: SimilarSection {
                    d: spec.d,
                    r_mat: matrix_to_rows(&spec.r_mat),
                    thetas: spec.thetas.clone(),
                    eta1: spec.eta1,
                },
            },
        }
    }

    pub fn resolve(&self) -> Result<Resolved, FormatError> {
        match &self.body {
            InstanceBody::Explicit { dim, rho1, rho2, eta1 } => {
                let m1 = rows_to_matrix(rho1)?;
                let m2 = rows_to_matrix(rho2)?;
                for (name, m) in [("rho1", &m1), ("rho2", &m2)] {
                    if m.rows() != *dim || m.cols() != *dim {
                        return Err(FormatError::Shape(format!(
                            "{name} is {}x{}, declared dim {dim}",
                            m.rows(),
                            m.cols()
                        )));
                    }
                }
                let inst = make_instance(validate_density(m1)?, validate_density(m2)?, *eta1)?;
                Ok(Resolved::Explicit(inst))
            }
            InstanceBody::Similar { similar: s } => {
                let spec = SimilarClassSpec {
                    d: s.d,
                    r_mat: rows_to_matrix(&s.r_mat)?,
                    thetas: s.thetas.clone(),
                    eta1: s.eta1,
                };
                let (instance, unitary) = similar::generate(&spec)?;
                Ok(Resolved::Similar {
                    spec,
                    instance,
                    unitary,
                })
            }
        }
    }
}
