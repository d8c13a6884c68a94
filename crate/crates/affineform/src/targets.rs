//! Target formations as affine images of the nominal configuration.
//!
//! A target assigns every agent the position `p*_i = G a_i + b` for a
//! shared linear part `G` and offset `b`. Rotations, scalings, shears,
//! translations, and rank-deficient flattenings (coplanar / colinear
//! targets) are all of this form, and the stress kernel contains every
//! one of them, which is what lets followers track any such target from
//! leader positions alone.
//!
//! Targets here are constant in time: the protocols this crate simulates
//! assume stationary leader references.

use crate::formation::NominalFormation;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("transform is {got}x{got2}, formation dimension is {expected}")]
    DimensionMismatch {
        got: usize,
        got2: usize,
        expected: usize,
    },
    #[error("unknown preset `{name}` for {case}")]
    UnknownPreset { case: BenchmarkCase, name: String },
}

/// A constant affine map `x -> G x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub label: String,
}

impl AffineTransform {
    pub fn new(linear: DMatrix<f64>, offset: DVector<f64>, label: impl Into<String>) -> Self {
        assert_eq!(linear.nrows(), linear.ncols(), "linear part must be square");
        assert_eq!(linear.nrows(), offset.len(), "offset dimension mismatch");
        Self {
            linear,
            offset,
            label: label.into(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), DVector::zeros(dim), "identity")
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.offset
    }

    /// Composition `self after other`.
    pub fn compose(&self, other: &AffineTransform) -> AffineTransform {
        AffineTransform::new(
            &self.linear * &other.linear,
            &self.linear * &other.offset + &self.offset,
            format!("{} . {}", self.label, other.label),
        )
    }
}

/// The two bundled benchmark systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BenchmarkCase {
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2")]
    Case2,
}

impl std::fmt::Display for BenchmarkCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchmarkCase::Case1 => write!(f, "case1"),
            BenchmarkCase::Case2 => write!(f, "case2"),
        }
    }
}

/// All agent targets for a formation, split at the leader boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFormation {
    points: Vec<DVector<f64>>,
    n_leaders: usize,
}

impl TargetFormation {
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn leaders(&self) -> &[DVector<f64>] {
        &self.points[..self.n_leaders]
    }

    pub fn followers(&self) -> &[DVector<f64>] {
        &self.points[self.n_leaders..]
    }

    pub fn point(&self, agent: usize) -> &DVector<f64> {
        &self.points[agent]
    }
}

/// Apply a transform to every nominal position.
pub fn target_formation(
    formation: &NominalFormation,
    transform: &AffineTransform,
) -> Result<TargetFormation, TargetError> {
    if transform.dim() != formation.dim() {
        return Err(TargetError::DimensionMismatch {
            got: transform.linear.nrows(),
            got2: transform.linear.ncols(),
            expected: formation.dim(),
        });
    }
    Ok(TargetFormation {
        points: formation.positions().iter().map(|a| transform.apply(a)).collect(),
        n_leaders: formation.leader_count(),
    })
}

/// Named transform presets for the two benchmark cases.
///
/// Preset names: `identity`, `rotation`, `scale`, `shear`,
/// `coplanar` (case 1) / `colinear` (case 2), and `combination`.
pub fn preset_transform(case: BenchmarkCase, name: &str) -> Result<AffineTransform, TargetError> {
    let c = FRAC_PI_4.cos();
    let s = FRAC_PI_4.sin();
    let t = match (case, name) {
        (BenchmarkCase::Case1, "identity") => AffineTransform::identity(3),
        (BenchmarkCase::Case1, "rotation") => AffineTransform::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]),
            DVector::zeros(3),
            "rotation",
        ),
        (BenchmarkCase::Case1, "scale") => AffineTransform::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 2.0, 2.0])),
            DVector::zeros(3),
            "scale",
        ),
        (BenchmarkCase::Case1, "shear") => AffineTransform::new(
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            DVector::zeros(3),
            "shear",
        ),
        (BenchmarkCase::Case1, "coplanar") => AffineTransform::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.0, 0.0])),
            DVector::zeros(3),
            "coplanar",
        ),
        (BenchmarkCase::Case1, "combination") => AffineTransform::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 0.5, -0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0]),
            DVector::from_column_slice(&[2.0, -2.0, 2.0]),
            "combination",
        ),
        (BenchmarkCase::Case2, "identity") => AffineTransform::identity(4),
        (BenchmarkCase::Case2, "rotation") => AffineTransform::new(
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    c, 0.0, -s, 0.0, //
                    0.0, 0.0, 0.0, 0.0, //
                    s, 0.0, c, 0.0, //
                    0.0, 0.0, 0.0, 0.0,
                ],
            ),
            DVector::zeros(4),
            "rotation",
        ),
        (BenchmarkCase::Case2, "scale") => AffineTransform::new(
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    2.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 2.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0,
                ],
            ),
            DVector::zeros(4),
            "scale",
        ),
        (BenchmarkCase::Case2, "shear") => AffineTransform::new(
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0, //
                    1.0, 0.0, 1.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0,
                ],
            ),
            DVector::zeros(4),
            "shear",
        ),
        (BenchmarkCase::Case2, "colinear") => AffineTransform::new(
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    3.0, 0.0, 1.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0, //
                    3.0, 0.0, 1.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0,
                ],
            ),
            DVector::zeros(4),
            "colinear",
        ),
        (BenchmarkCase::Case2, "combination") => AffineTransform::new(
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    c / 2.0,
                    0.0,
                    -s / 2.0,
                    0.0, //
                    0.0,
                    0.0,
                    0.0,
                    0.0, //
                    (c + s) / 2.0,
                    0.0,
                    (c - s) / 2.0,
                    0.0, //
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                ],
            ),
            DVector::from_column_slice(&[-2.0, 0.0, 2.0, 0.0]),
            "combination",
        ),
        (case, name) => {
            return Err(TargetError::UnknownPreset {
                case,
                name: name.to_string(),
            })
        }
    };
    Ok(t)
}

/// Preset names available for a case, in catalog order.
pub fn preset_names(case: BenchmarkCase) -> &'static [&'static str] {
    match case {
        BenchmarkCase::Case1 => &["identity", "rotation", "scale", "shear", "coplanar", "combination"],
        BenchmarkCase::Case2 => &["identity", "rotation", "scale", "shear", "colinear", "combination"],
    }
}
