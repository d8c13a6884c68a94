//! Serde adapters for the on-disk document formats.
//!
//! Matrices appear in scenario and design files as arrays of rows. Hand
//! written TOML naturally mixes integers and floats (`[[1, 1, 0], ...]`),
//! so deserialization accepts both.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    F(f64),
    I(i64),
}

impl Num {
    fn as_f64(&self) -> f64 {
        match self {
            Num::F(x) => *x,
            Num::I(x) => *x as f64,
        }
    }
}

/// `Vec<Vec<f64>>` with integer leniency on input.
pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let raw: Vec<Vec<Num>> = Deserialize::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|r| r.iter().map(Num::as_f64).collect())
            .collect())
    }
}

/// `Option<Vec<Vec<f64>>>` with integer leniency on input.
pub mod opt_rows {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<Vec<f64>>>, s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<f64>>>, D::Error> {
        let raw: Option<Vec<Vec<Num>>> = Deserialize::deserialize(d)?;
        Ok(raw.map(|rows| {
            rows.into_iter()
                .map(|r| r.iter().map(Num::as_f64).collect())
                .collect()
        }))
    }
}

/// `Vec<f64>` with integer leniency on input.
pub mod floats {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Num> = Deserialize::deserialize(d)?;
        Ok(raw.iter().map(Num::as_f64).collect())
    }
}

/// `u64` seeds in TOML: integers only reach `i64::MAX` there, so larger
/// seeds are carried as strings.
pub mod seed {
    use super::*;

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *v <= i64::MAX as u64 {
            s.serialize_i64(*v as i64)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            I(i64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::I(x) if x >= 0 => Ok(x as u64),
            Raw::I(x) => Err(serde::de::Error::custom(format!("negative seed {x}"))),
            Raw::S(s) => s
                .parse::<u64>()
                .map_err(|e| serde::de::Error::custom(format!("seed `{s}`: {e}"))),
        }
    }
}

/// Convert row-major nested arrays into a dense matrix, checking that the
/// rows are rectangular.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() {
        return Err("matrix has no rows".into());
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err("matrix has empty rows".into());
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                r.len(),
                ncols
            ));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn vector_to_row(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
