//! JSON formats.
//!
//! A matrix literal is a list of rows; each entry is either a real number or a
//! `[re, im]` pair. Matrices serialize as `[re, im]` pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::cbnorm::LinearMap;
use crate::matrix::{ComplexMatrix, C64};
use crate::opspace::{MatrixNormFamily, Space, SpaceDefinition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(r) => C64::new(r, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// `[[entry, ...], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixLiteral(pub Vec<Vec<Entry>>);

impl MatrixLiteral {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map(|r| r.len()).unwrap_or(0);
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Input("ragged matrix literal".into()));
        }
        let data = self.0.iter().flatten().map(|e| e.value()).collect();
        ComplexMatrix::new(rows, cols, data).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        MatrixLiteral(
            (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| Entry::Complex([m[(i, j)].re, m[(i, j)].im])).collect())
                .collect(),
        )
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixLiteral::from_matrix(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MatrixLiteral::deserialize(d)?.to_matrix().map_err(D::Error::custom)
    }
}

pub fn parse_matrix(json: &str) -> Result<ComplexMatrix> {
    let lit: MatrixLiteral = serde_json::from_str(json).map_err(|e| Error::Input(e.to_string()))?;
    lit.to_matrix()
}

/// A built-in name such as `"full:2"` or an inline space definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Named(String),
    Defined(SpaceDefinition),
}

impl SpaceRef {
    pub fn resolve(&self) -> Result<Space> {
        match self {
            SpaceRef::Named(n) => Space::builtin(n),
            SpaceRef::Defined(d) => d.build(),
        }
    }
}

/// A number or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(String),
}

impl Exponent {
    pub fn value(&self) -> Result<f64> {
        match self {
            Exponent::Finite(p) => Ok(*p),
            Exponent::Named(s) if s == "inf" => Ok(f64::INFINITY),
            Exponent::Named(s) => Err(Error::Input(format!("bad exponent '{s}'"))),
        }
    }
}

fn grid_to_coeffs(grid: &[Vec<Vec<Entry>>], dim: usize) -> Result<Vec<ComplexMatrix>> {
    let rows = grid.len();
    let cols = grid.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 || grid.iter().any(|r| r.len() != cols) {
        return Err(Error::Input("coefficient grid must be a nonempty rectangle".into()));
    }
    if grid.iter().flatten().any(|v| v.len() != dim) {
        return Err(Error::Input(format!("every entry must be a coordinate vector of length {dim}")));
    }
    let coeffs: Vec<ComplexMatrix> = (0..dim).map(|i| ComplexMatrix::from_fn(rows, cols, |r, c| grid[r][c][i].value())).collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Input("non-finite entry".into()));
    }
    Ok(coeffs)
}

/// `{ "p", "m", "space", "coeffs" }`: `coeffs[k][l]` is the coordinate vector
/// of the `(k, l)` entry in the basis of the space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementFile {
    #[serde(default)]
    pub p: Option<Exponent>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub space: Option<SpaceRef>,
    pub coeffs: Vec<Vec<Vec<Entry>>>,
}

impl ElementFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Input(e.to_string()))
    }

    /// Coefficients per basis vector of `space`.
    pub fn coeffs(&self, space: &Space) -> Result<Vec<ComplexMatrix>> {
        let c = grid_to_coeffs(&self.coeffs, space.dim())?;
        if let Some(m) = self.m {
            if c[0].shape() != (m, m) {
                return Err(Error::Input(format!("declared m = {m} but the grid is {:?}", c[0].shape())));
            }
        }
        Ok(c)
    }
}

/// `{ "coeffs": [[X_ij]] }` for `sum X_ij (x) e_i (x) f_j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFile {
    pub coeffs: Vec<Vec<ComplexMatrix>>,
}

impl TensorFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Input(e.to_string()))
    }
}

/// `{ "domain", "codomain", "action" }` with `action` a `dim F x dim E` matrix literal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapFile {
    pub domain: SpaceRef,
    pub codomain: SpaceRef,
    pub action: ComplexMatrix,
}

impl MapFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn build(&self) -> Result<LinearMap> {
        LinearMap::new(self.domain.resolve()?, self.codomain.resolve()?, self.action.clone()).map_err(|e| Error::Input(e.to_string()))
    }
}
