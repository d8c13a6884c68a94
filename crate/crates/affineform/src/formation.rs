//! Nominal formations: the graph, the configuration, and the
//! leader/follower partition.
//!
//! A formation couples an undirected communication graph on `n` agents
//! with a nominal configuration, one position per agent. Leaders occupy
//! the first `n_leaders` indices. Everything downstream (stress matrices,
//! target generation, simulation) is built on top of this type, so its
//! constructor enforces the structural invariants once and for all.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormationError {
    #[error("formation needs at least one leader and one follower (n = {n}, leaders = {n_leaders})")]
    BadPartition { n: usize, n_leaders: usize },
    #[error("position {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("edge ({i}, {j}) is out of range for {n} agents (agent ids are 1-based)")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({i}, {j}) is a self-loop")]
    SelfLoop { i: usize, j: usize },
    #[error("empty point list")]
    Empty,
    #[error("failed to read formation file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse formation file: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Graph + nominal configuration + leader/follower partition.
///
/// Edges are stored 0-based with `i < j`; the file format and CLI speak
/// 1-based agent ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalFormation {
    n: usize,
    n_leaders: usize,
    dim: usize,
    positions: Vec<DVector<f64>>,
    edges: BTreeSet<(usize, usize)>,
}

impl NominalFormation {
    pub fn new(
        n_leaders: usize,
        positions: Vec<DVector<f64>>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, FormationError> {
        let n = positions.len();
        if n == 0 {
            return Err(FormationError::Empty);
        }
        if n_leaders == 0 || n_leaders >= n {
            return Err(FormationError::BadPartition { n, n_leaders });
        }
        let dim = positions[0].len();
        for (index, p) in positions.iter().enumerate() {
            if p.len() != dim {
                return Err(FormationError::DimensionMismatch {
                    index,
                    got: p.len(),
                    expected: dim,
                });
            }
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(FormationError::SelfLoop { i: i + 1, j: j + 1 });
            }
            if i >= n || j >= n {
                return Err(FormationError::EdgeOutOfRange {
                    i: i + 1,
                    j: j + 1,
                    n,
                });
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self {
            n,
            n_leaders,
            dim,
            positions,
            edges: set,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn leader_count(&self) -> usize {
        self.n_leaders
    }

    pub fn follower_count(&self) -> usize {
        self.n - self.n_leaders
    }

    /// Ambient dimension of the stored positions.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[DVector<f64>] {
        &self.positions
    }

    pub fn position(&self, agent: usize) -> &DVector<f64> {
        &self.positions[agent]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, agent: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| j != agent && self.has_edge(agent, j))
            .collect()
    }

    pub fn is_leader(&self, agent: usize) -> bool {
        agent < self.n_leaders
    }

    /// Configuration matrix with one position per row.
    pub fn configuration(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.dim, |i, k| self.positions[i][k])
    }

    /// Configuration matrix augmented with a column of ones.
    pub fn augmented_configuration(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.dim + 1);
        for i in 0..self.n {
            for k in 0..self.dim {
                m[(i, k)] = self.positions[i][k];
            }
            m[(i, self.dim)] = 1.0;
        }
        m
    }

    /// Dimension of the affine hull of the configuration.
    ///
    /// Positions may be embedded in a larger ambient space (for example a
    /// planar layout stored inside position/velocity states). Rank and
    /// kernel bookkeeping for stresses use this effective dimension, not
    /// the ambient one.
    pub fn affine_dim(&self) -> usize {
        affine_span_rank(&self.positions).saturating_sub(1)
    }

    /// Leaders affinely span the configuration's affine hull, i.e. the
    /// augmented leader rows have the same rank as the full augmented
    /// configuration.
    pub fn leaders_span(&self) -> bool {
        let leaders: Vec<DVector<f64>> = self.positions[..self.n_leaders].to_vec();
        affine_span_rank(&leaders) == self.affine_dim() + 1
    }

    pub fn leader_positions(&self) -> &[DVector<f64>] {
        &self.positions[..self.n_leaders]
    }

    pub fn follower_positions(&self) -> &[DVector<f64>] {
        &self.positions[self.n_leaders..]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormationError> {
        let text = std::fs::read_to_string(path)?;
        let file: FormationFile = toml::from_str(&text)?;
        file.build()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormationError> {
        let file = FormationFile::from(self);
        let text = toml::to_string_pretty(&file).expect("formation serialization");
        if let Some(parent) = path.as_ref().parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Rank of the augmented matrix `[p_i^T, 1]` stacked over the given
/// points. The points affinely span a `d`-dimensional space exactly when
/// this returns `d + 1`.
pub fn affine_span_rank(points: &[DVector<f64>]) -> usize {
    assert!(!points.is_empty(), "affine_span_rank of an empty point list");
    let dim = points[0].len();
    for p in points {
        assert_eq!(p.len(), dim, "affine_span_rank: mixed point dimensions");
    }
    let mut m = DMatrix::zeros(points.len(), dim + 1);
    for (i, p) in points.iter().enumerate() {
        for k in 0..dim {
            m[(i, k)] = p[k];
        }
        m[(i, dim)] = 1.0;
    }
    crate::linalg::rank(&m, 1e-10)
}

/// On-disk representation (TOML): positions row-major, edges as 1-based
/// agent id pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationFile {
    pub n: usize,
    pub n_leaders: usize,
    pub d: usize,
    #[serde(with = "crate::serde_util::rows")]
    pub positions: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
}

impl FormationFile {
    pub fn build(&self) -> Result<NominalFormation, FormationError> {
        if self.positions.len() != self.n {
            return Err(FormationError::BadPartition {
                n: self.positions.len(),
                n_leaders: self.n_leaders,
            });
        }
        let positions: Vec<DVector<f64>> = self
            .positions
            .iter()
            .map(|row| DVector::from_column_slice(row))
            .collect();
        for (index, p) in positions.iter().enumerate() {
            if p.len() != self.d {
                return Err(FormationError::DimensionMismatch {
                    index,
                    got: p.len(),
                    expected: self.d,
                });
            }
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(i, j)| (i.wrapping_sub(1), j.wrapping_sub(1)))
            .collect();
        NominalFormation::new(self.n_leaders, positions, edges)
    }
}

impl From<&NominalFormation> for FormationFile {
    fn from(f: &NominalFormation) -> Self {
        FormationFile {
            n: f.agent_count(),
            n_leaders: f.leader_count(),
            d: f.dim(),
            positions: f
                .positions()
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect(),
            edges: f.edges().map(|(i, j)| (i + 1, j + 1)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn case1_leaders_span_r3() {
        // four leaders of the ten-agent benchmark
        let leaders = vec![
            DVector::from_column_slice(&[2.0, 4.0, 0.0]),
            DVector::from_column_slice(&[-2.0, -4.0, 0.0]),
            DVector::from_column_slice(&[-2.0, 2.0, 4.0]),
            DVector::from_column_slice(&[2.0, -2.0, 4.0]),
        ];
        assert_eq!(affine_span_rank(&leaders), 4);
    }

    #[test]
    fn single_point_spans_zero_dim() {
        let pts = vec![DVector::from_column_slice(&[1.0, 2.0, 3.0])];
        assert_eq!(affine_span_rank(&pts), 1);
    }

    #[test]
    fn coplanar_points_rank_three() {
        // four points, all z = 0: affine hull is a plane
        let pts = vec![
            DVector::from_column_slice(&[0.0, 0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 0.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0, 0.0]),
            DVector::from_column_slice(&[1.0, 1.0, 0.0]),
        ];
        assert_eq!(affine_span_rank(&pts), 3);
    }

    #[test]
    fn rejects_bad_edges() {
        let pts = vec![
            DVector::from_column_slice(&[0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
        ];
        assert!(matches!(
            NominalFormation::new(1, pts.clone(), vec![(0, 0)]),
            Err(FormationError::SelfLoop { .. })
        ));
        assert!(matches!(
            NominalFormation::new(1, pts, vec![(0, 5)]),
            Err(FormationError::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn planar_layout_in_state_space_has_effective_dim_two() {
        let f = fixtures::case2_formation();
        assert_eq!(f.dim(), 4);
        assert_eq!(f.affine_dim(), 2);
        assert!(f.leaders_span());
    }

    #[test]
    fn file_round_trip() {
        let f = fixtures::case1_formation();
        let dir = std::env::temp_dir().join("affineform-formation-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.toml");
        f.save(&path).unwrap();
        let back = NominalFormation::load(&path).unwrap();
        assert_eq!(f, back);
    }
}
