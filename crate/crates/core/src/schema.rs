//! JSON layer. Every file carries `"schema": "ccopt-v1"`; matrices are dense
//! row-major arrays and infinite reals are the strings `"inf"` / `"-inf"`.

use nalgebra::{DMatrix, DVector};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::atoms::ConvexAtom;
use crate::cardinality::Variant;
use crate::error::{Error, Result};
use crate::model::{DualModel, PrimalModel};

pub const SCHEMA_VERSION: &str = "ccopt-v1";

pub fn serialize_ext_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_nan() {
        s.serialize_none()
    } else if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else if *v == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(*v)
    }
}

struct ExtVisitor;

impl<'de> Visitor<'de> for ExtVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("a number, \"inf\", \"-inf\" or null")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
        match v.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
        }
    }

    fn visit_none<E: de::Error>(self) -> std::result::Result<f64, E> {
        Ok(f64::NAN)
    }

    fn visit_unit<E: de::Error>(self) -> std::result::Result<f64, E> {
        Ok(f64::NAN)
    }
}

pub fn deserialize_ext_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    d.deserialize_any(ExtVisitor)
}

/// `#[serde(with = "ext_f64")]` for a single extended real.
pub mod ext_f64 {
    pub use super::deserialize_ext_f64 as deserialize;
    pub use super::serialize_ext_f64 as serialize;
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Ext(f64);

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_ext_f64(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        deserialize_ext_f64(d).map(Ext)
    }
}

/// `#[serde(with = "ext_vec")]` for `Vec<f64>` with infinite entries.
pub mod ext_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| Ext(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let v: Vec<Ext> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|e| e.0).collect())
    }
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Builds a matrix from rows; `cols` fixes the width when there are no rows.
pub fn rows_to_matrix(rows: &[Vec<f64>], cols: Option<usize>, context: &str) -> Result<DMatrix<f64>> {
    let width = match (rows.first(), cols) {
        (Some(r), _) => r.len(),
        (None, Some(c)) => c,
        (None, None) => 0,
    };
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::InvalidParams(format!(
                "{context}: row {i} has {} entries, expected {width}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

pub fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn default_schema() -> String {
    SCHEMA_VERSION.to_string()
}

/// On-disk form of a primal model. `mu` is optional; dual commands default
/// it to `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub f: ConvexAtom,
    pub g: ConvexAtom,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b_mat: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub variant: Variant,
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

impl ModelFile {
    pub fn from_primal(p: &PrimalModel, mu: Option<&DVector<f64>>) -> Self {
        ModelFile {
            schema: SCHEMA_VERSION.to_string(),
            f: p.f.clone(),
            g: p.g.clone(),
            a: matrix_to_rows(&p.a),
            b_mat: matrix_to_rows(&p.b),
            b: vec_of(&p.rhs),
            variant: p.card.variant,
            lambda: vec_of(&p.card.weights),
            mu: mu.map(vec_of),
        }
    }

    pub fn to_primal(&self) -> Result<PrimalModel> {
        check_schema(&self.schema)?;
        let n = self.f.dim;
        let a = rows_to_matrix(&self.a, Some(n), "A")?;
        let b = rows_to_matrix(&self.b_mat, Some(n), "B")?;
        PrimalModel::new(
            self.f.clone(),
            self.g.clone(),
            a,
            b,
            DVector::from_vec(self.b.clone()),
            self.variant,
            DVector::from_vec(self.lambda.clone()),
        )
    }

    /// The stationary dual with `mu` (or `lambda` when absent).
    pub fn to_dual(&self) -> Result<DualModel> {
        let p = self.to_primal()?;
        let mu = DVector::from_vec(self.mu.clone().unwrap_or_else(|| self.lambda.clone()));
        p.derive_dual(&mu)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A point file: `{"schema": "ccopt-v1", "point": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(with = "ext_vec")]
    pub point: Vec<f64>,
}

/// A labelled point cloud for the separability check; rows of `points` are samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl DataFile {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        check_schema(&self.schema)?;
        rows_to_matrix(&self.points, None, "points")
    }
}

pub fn check_schema(s: &str) -> Result<()> {
    if s != SCHEMA_VERSION {
        return Err(Error::InvalidParams(format!(
            "unsupported schema `{s}`, expected `{SCHEMA_VERSION}`"
        )));
    }
    Ok(())
}
